#include "lbq/policy.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace lbq {

Policy Policy::jsq() {
    Policy p;
    p.kind = PolicyKind::Jsq;
    p.label = "jsq";
    return p;
}

Policy Policy::idle_one_first() {
    Policy p;
    p.kind = PolicyKind::IdleOneFirst;
    p.label = "i1f";
    return p;
}

Policy Policy::join_idle_queue() {
    Policy p;
    p.kind = PolicyKind::JoinIdleQueue;
    p.label = "jiq";
    return p;
}

Policy Policy::random() {
    Policy p;
    p.kind = PolicyKind::Random;
    p.label = "random";
    return p;
}

Policy Policy::power_of_d(std::int64_t d, Sampling sampling) {
    if (d < 1) throw std::invalid_argument("power_of_d: d must be >= 1");
    Policy p;
    p.kind = PolicyKind::PowerOfD;
    p.d = d;
    p.sampling = sampling;
    p.label = "pod";
    return p;
}

Policy Policy::custom(
    std::function<double(const AggregateState &, const Params &, std::int64_t)> a,
    std::string label) {
    Policy p;
    p.kind = PolicyKind::Custom;
    p.custom_a = std::move(a);
    p.label = std::move(label);
    return p;
}

std::string Policy::name() const {
    if (kind == PolicyKind::PowerOfD)
        return "pod(" + std::to_string(d) +
               (sampling == Sampling::WithReplacement ? ",with" : ",without") + ")";
    return label;
}

namespace {

// P(all d sampled without replacement hold >= level jobs) = C(m, d)/C(N, d)
// for m servers in the tail. Exact product for the cases tests rely on:
// m < d gives 0, m = N gives 1, d = 1 gives m/N.
double hypergeom_all(std::int64_t m, std::int64_t n, std::int64_t d) {
    if (d > n) throw std::invalid_argument("power_of_d: without-replacement needs d <= N");
    if (m < d) return 0.0;
    if (m == n) return 1.0;
    if (d == 1) return static_cast<double>(m) / static_cast<double>(n);
    if (d <= 128) {
        double prod = 1.0;
        for (std::int64_t j = 0; j < d; ++j)
            prod *= static_cast<double>(m - j) / static_cast<double>(n - j);
        return prod;
    }
    double lg = std::lgamma(static_cast<double>(m + 1)) -
                std::lgamma(static_cast<double>(m - d + 1)) -
                std::lgamma(static_cast<double>(n + 1)) +
                std::lgamma(static_cast<double>(n - d + 1));
    return std::exp(lg);
}

double pow_int(double x, std::int64_t d) {
    if (d == 1) return x;
    double acc = 1.0, base = x;
    std::int64_t e = d;
    while (e > 0) {
        if (e & 1) acc *= base;
        base *= base;
        e >>= 1;
    }
    return acc;
}

} // namespace

double a_tail(const Policy &policy, const AggregateState &s, const Params &p,
              std::int64_t level) {
    if (level < 1 || level > p.buffer_levels)
        throw std::out_of_range("a_tail: level must be in 1..b");
    const std::int64_t n = p.n_servers;
    const std::int64_t tail = s.tail_count(level);
    const bool all_busy = s.counts[0] == 0;

    switch (policy.kind) {
    case PolicyKind::Jsq:
        // Joins a minimum-occupancy server: lands at >= level iff every
        // server is at >= level.
        return tail == n ? 1.0 : 0.0;
    case PolicyKind::IdleOneFirst: {
        if (!all_busy) return 0.0;
        if (level == 1) return 1.0;
        // All busy: take a one-job server if one exists, else uniform.
        const bool has_one_job = s.tail_count(2) < n;
        if (has_one_job) return 0.0;
        return static_cast<double>(tail) / static_cast<double>(n);
    }
    case PolicyKind::JoinIdleQueue:
        if (!all_busy) return 0.0;
        return static_cast<double>(tail) / static_cast<double>(n);
    case PolicyKind::Random:
        return static_cast<double>(tail) / static_cast<double>(n);
    case PolicyKind::PowerOfD: {
        if (policy.sampling == Sampling::WithReplacement)
            return pow_int(static_cast<double>(tail) / static_cast<double>(n), policy.d);
        return hypergeom_all(tail, n, policy.d);
    }
    case PolicyKind::Custom:
        return policy.custom_a(s, p, level);
    }
    throw std::logic_error("a_tail: unreachable");
}

JoinDistribution join_distribution(const Policy &policy, const AggregateState &s,
                                   const Params &p) {
    const std::int64_t b = p.buffer_levels;
    std::vector<double> a(static_cast<std::size_t>(b) + 1);
    a[0] = 1.0;
    for (std::int64_t i = 1; i <= b; ++i) {
        const double v = a_tail(policy, s, p, i);
        if (!(v >= 0.0 && v <= 1.0))
            throw std::domain_error("join_distribution: A_" + std::to_string(i) +
                                    " = " + std::to_string(v) + " outside [0,1]");
        if (v > a[static_cast<std::size_t>(i - 1)] + 1e-15)
            throw std::domain_error("join_distribution: A_i increasing at level " +
                                    std::to_string(i));
        a[static_cast<std::size_t>(i)] = v;
    }
    JoinDistribution jd;
    jd.p_join.resize(static_cast<std::size_t>(b));
    for (std::int64_t i = 0; i < b; ++i)
        jd.p_join[static_cast<std::size_t>(i)] =
            a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i + 1)];
    jd.p_block = a[static_cast<std::size_t>(b)];
    return jd;
}

double pi_cond1_threshold(const Params &p) {
    return 1.0 / std::sqrt(static_cast<double>(p.n_servers));
}

double pi_cond1_region(const Params &p) {
    return 1.0 - 1.0 / (4.0 * std::pow(static_cast<double>(p.n_servers), p.alpha));
}

double pi_cond2_threshold(const Params &p, std::int64_t r) {
    const double n1a = std::pow(static_cast<double>(p.n_servers), 1.0 - p.alpha);
    return 10.0 * std::pow(2.0 * static_cast<double>(r) / n1a, static_cast<double>(r));
}

namespace {

// Largest achievable tail fraction m/N not exceeding `x`.
std::int64_t floor_count(double x, std::int64_t n) {
    auto m = static_cast<std::int64_t>(std::floor(x * static_cast<double>(n) + 1e-9));
    if (m < 0) m = 0;
    if (m > n) m = n;
    return m;
}

AggregateState state_with_tails(const Params &p, std::int64_t t1, std::int64_t t2) {
    // counts = (N - t1, t1 - t2, t2, 0, ...) for b >= 2; (N - t1, t1) for b = 1.
    AggregateState s = empty_state(p);
    s.counts[0] = p.n_servers - t1;
    if (p.buffer_levels == 1) {
        s.counts[1] = t1;
    } else {
        s.counts[1] = t1 - t2;
        s.counts[2] = t2;
    }
    return s;
}

PiReport analytic_membership(const Policy &policy, const Params &p, std::int64_t r) {
    PiReport rep;
    rep.r_tested = r;
    const std::int64_t n = p.n_servers;
    const std::int64_t b = p.buffer_levels;
    const double thr1 = pi_cond1_threshold(p);
    const double thr2 = pi_cond2_threshold(p, r);

    // Worst case for condition 1: the largest admissible s_1.
    const std::int64_t t1 = floor_count(pi_cond1_region(p), n);
    AggregateState w1 = state_with_tails(p, t1, 0);
    double a1 = a_tail(policy, w1, p, 1);
    // JSQ/I1F/JIQ give A_1 = 0 everywhere in the region since s_1 < 1 there.
    rep.cond1.margin = thr1 - a1;
    rep.cond1.holds = a1 <= thr1;
    if (!rep.cond1.holds) rep.cond1.witness = w1;

    // Worst case for condition 2: s_1 = 1 with the largest s_2 <= 0.95
    // (largest achievable A_2 for each built-in); b = 1 has no condition-2
    // states beyond A_1, handled with level min(2, b).
    if (b >= 2) {
        const std::int64_t t2 = floor_count(0.95, n);
        AggregateState w2 = state_with_tails(p, n, t2);
        double a2 = a_tail(policy, w2, p, 2);
        rep.cond2.margin = thr2 - a2;
        rep.cond2.holds = a2 <= thr2;
        if (!rep.cond2.holds) rep.cond2.witness = w2;
    } else {
        rep.cond2.holds = true;
        rep.cond2.margin = thr2;
    }

    // Condition 3 holds with margin 0 for every built-in: A_b is either an
    // indicator of s_b = 1, a power/hypergeometric tail of s_b, or s_b
    // itself. The worst case is the full state, where all five give
    // A_b = s_b = 1.
    AggregateState full = empty_state(p);
    full.counts[0] = 0;
    full.counts[static_cast<std::size_t>(b)] = n;
    double ab = a_tail(policy, full, p, b);
    rep.cond3.margin = tail_fraction(full, p, b) - ab;
    rep.cond3.holds = ab <= tail_fraction(full, p, b);
    if (!rep.cond3.holds) rep.cond3.witness = full;

    rep.member = rep.cond1.holds && rep.cond2.holds && rep.cond3.holds;
    return rep;
}

} // namespace

PiReport check_pi_membership(const Policy &policy, const Params &p, std::int64_t r,
                             PiCheckMode mode, std::int64_t cap) {
    if (r < 1) throw std::invalid_argument("check_pi_membership: r must be >= 1");
    if (mode == PiCheckMode::Analytic) {
        if (policy.kind == PolicyKind::Custom)
            throw std::invalid_argument("analytic membership needs a built-in policy");
        return analytic_membership(policy, p, r);
    }

    const std::int64_t size = state_space_size(p.n_servers, p.buffer_levels);
    if (size > cap)
        throw std::length_error("check_pi_membership: state space has " +
                                std::to_string(size) + " states, cap is " +
                                std::to_string(cap));

    PiReport rep;
    rep.r_tested = r;
    const double thr1 = pi_cond1_threshold(p);
    const double region1 = pi_cond1_region(p);
    const double thr2 = pi_cond2_threshold(p, r);
    rep.cond1.margin = thr1;
    rep.cond2.margin = thr2;
    rep.cond3.margin = 1.0;
    bool any1 = false, any2 = false;

    for_each_state(p, [&](const AggregateState &s) {
        const double s1 = tail_fraction(s, p, 1);
        const double sb = tail_fraction(s, p, p.buffer_levels);
        if (s1 <= region1) {
            const double a1 = a_tail(policy, s, p, 1);
            any1 = true;
            rep.cond1.margin = std::min(rep.cond1.margin, thr1 - a1);
            if (a1 > thr1 && !rep.cond1.witness) rep.cond1.witness = s;
        }
        if (p.buffer_levels >= 2) {
            const double s2 = tail_fraction(s, p, 2);
            if (s2 <= 0.95) {
                const double a2 = a_tail(policy, s, p, 2);
                any2 = true;
                rep.cond2.margin = std::min(rep.cond2.margin, thr2 - a2);
                if (a2 > thr2 && !rep.cond2.witness) rep.cond2.witness = s;
            }
        }
        const double ab = a_tail(policy, s, p, p.buffer_levels);
        rep.cond3.margin = std::min(rep.cond3.margin, sb - ab);
        if (ab > sb + 1e-15 && !rep.cond3.witness) rep.cond3.witness = s;
    });

    rep.cond1.holds = !rep.cond1.witness;
    rep.cond2.holds = !rep.cond2.witness;
    rep.cond3.holds = !rep.cond3.witness;
    if (!any1) rep.cond1.margin = thr1;
    if (!any2) rep.cond2.margin = thr2;
    rep.member = rep.cond1.holds && rep.cond2.holds && rep.cond3.holds;
    return rep;
}

} // namespace lbq
