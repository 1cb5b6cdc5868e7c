#include "lbq/state.hpp"

#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lbq {

std::int64_t AggregateState::tail_count(std::int64_t level) const {
    if (level <= 0) return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    if (level > levels()) return 0;
    return std::accumulate(counts.begin() + level, counts.end(), std::int64_t{0});
}

AggregateState empty_state(const Params &p) {
    AggregateState s;
    s.counts.assign(static_cast<std::size_t>(p.buffer_levels) + 1, 0);
    s.counts[0] = p.n_servers;
    return s;
}

void validate_state(const AggregateState &s, const Params &p) {
    if (s.levels() != p.buffer_levels)
        throw std::invalid_argument("state: expected " + std::to_string(p.buffer_levels + 1) +
                                    " cells, got " + std::to_string(s.levels() + 1));
    std::int64_t total = 0;
    for (auto c : s.counts) {
        if (c < 0) throw std::invalid_argument("state: negative cell count");
        total += c;
    }
    if (total != p.n_servers)
        throw std::invalid_argument("state: cells sum to " + std::to_string(total) +
                                    ", expected N = " + std::to_string(p.n_servers));
}

std::vector<double> tail_fractions(const AggregateState &s, const Params &p) {
    std::vector<double> out(static_cast<std::size_t>(p.buffer_levels));
    std::int64_t tail = 0;
    for (std::int64_t i = p.buffer_levels; i >= 1; --i) {
        tail += s.counts[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i - 1)] =
            static_cast<double>(tail) / static_cast<double>(p.n_servers);
    }
    return out;
}

double tail_fraction(const AggregateState &s, const Params &p, std::int64_t level) {
    if (level <= 0) return 1.0;
    if (level > p.buffer_levels) return 0.0;
    return static_cast<double>(s.tail_count(level)) / static_cast<double>(p.n_servers);
}

double total_per_server(const AggregateState &s, const Params &p) {
    std::int64_t jobs = 0;
    for (std::int64_t i = 1; i <= p.buffer_levels; ++i)
        jobs += i * s.counts[static_cast<std::size_t>(i)];
    return static_cast<double>(jobs) / static_cast<double>(p.n_servers);
}

std::int64_t state_space_size(std::int64_t n_servers, std::int64_t buffer_levels) {
    // C(N+b, b), exact while it fits; clamped to INT64_MAX beyond that.
    const __int128 lim = std::numeric_limits<std::int64_t>::max();
    __int128 result = 1;
    for (std::int64_t i = 1; i <= buffer_levels; ++i) {
        result = result * (n_servers + i) / i; // stays integral: C(N+i,i) = C(N+i-1,i-1)(N+i)/i
        if (result > lim) return std::numeric_limits<std::int64_t>::max();
    }
    return static_cast<std::int64_t>(result);
}

void for_each_state(const Params &p,
                    const std::function<void(const AggregateState &)> &fn) {
    AggregateState s;
    s.counts.assign(static_cast<std::size_t>(p.buffer_levels) + 1, 0);
    const std::size_t cells = s.counts.size();
    // Lexicographic enumeration of compositions: cell 0 is determined by the
    // rest, so iterate the tail cells odometer-style.
    std::function<void(std::size_t, std::int64_t)> rec = [&](std::size_t cell,
                                                             std::int64_t remaining) {
        if (cell == cells - 1) {
            s.counts[cell] = remaining;
            fn(s);
            return;
        }
        for (std::int64_t v = 0; v <= remaining; ++v) {
            s.counts[cell] = v;
            rec(cell + 1, remaining - v);
        }
    };
    rec(0, p.n_servers);
}

std::string to_string(const AggregateState &s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
        if (i) os << ",";
        os << s.counts[i];
    }
    os << ")";
    return os.str();
}

} // namespace lbq
