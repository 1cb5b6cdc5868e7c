#include "lbq/transitions.hpp"

namespace lbq {

std::vector<Transition> transitions(const AggregateState &s, const Policy &policy,
                                    const Params &p) {
    const std::int64_t b = p.buffer_levels;
    const double arrival_rate = p.arrival_rate();
    const JoinDistribution jd = join_distribution(policy, s, p);

    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(2 * b + 1));

    for (std::int64_t i = 1; i <= b; ++i) {
        const double rate = arrival_rate * jd.p_join[static_cast<std::size_t>(i - 1)];
        if (rate > 0.0 && s.counts[static_cast<std::size_t>(i - 1)] > 0) {
            Transition t;
            t.target = s;
            t.target.counts[static_cast<std::size_t>(i - 1)] -= 1;
            t.target.counts[static_cast<std::size_t>(i)] += 1;
            t.rate = rate;
            t.kind = TransitionKind::ArrivalJoin;
            t.level = i;
            out.push_back(std::move(t));
        }
    }
    if (jd.p_block > 0.0) {
        Transition t;
        t.target = s; // self-loop, kept so p_B is a direct arrival average
        t.rate = arrival_rate * jd.p_block;
        t.kind = TransitionKind::ArrivalBlocked;
        out.push_back(std::move(t));
    }
    for (std::int64_t i = 1; i <= b; ++i) {
        const std::int64_t busy_here = s.counts[static_cast<std::size_t>(i)];
        if (busy_here > 0) {
            Transition t;
            t.target = s;
            t.target.counts[static_cast<std::size_t>(i)] -= 1;
            t.target.counts[static_cast<std::size_t>(i - 1)] += 1;
            t.rate = static_cast<double>(busy_here);
            t.kind = TransitionKind::Departure;
            t.level = i;
            out.push_back(std::move(t));
        }
    }
    return out;
}

} // namespace lbq
