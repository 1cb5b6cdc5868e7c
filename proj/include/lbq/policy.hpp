#ifndef LBQ_POLICY_HPP
#define LBQ_POLICY_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lbq/params.hpp"
#include "lbq/state.hpp"

namespace lbq {

enum class PolicyKind { Jsq, IdleOneFirst, PowerOfD, JoinIdleQueue, Random, Custom };
enum class Sampling { WithReplacement, WithoutReplacement };

// A routing rule, fully described at the histogram level by the tail
// routing probabilities A_i(s) = P(job joins a server with >= i jobs | s).
// Immutable value; all evaluation is pure.
struct Policy {
    PolicyKind kind = PolicyKind::Random;
    std::int64_t d = 1;                     // Po-d sample size
    Sampling sampling = Sampling::WithReplacement;
    std::string label;
    // Test hook: arbitrary A_i(s), possibly malformed.
    std::function<double(const AggregateState &, const Params &, std::int64_t)> custom_a;

    static Policy jsq();
    static Policy idle_one_first();
    static Policy join_idle_queue();
    static Policy random();
    // Throws std::invalid_argument on d < 1.
    static Policy power_of_d(std::int64_t d, Sampling sampling = Sampling::WithReplacement);
    static Policy custom(std::function<double(const AggregateState &, const Params &, std::int64_t)> a,
                         std::string label);

    std::string name() const;
};

// A_level(s): probability an incoming job is routed to a server with at
// least `level` jobs. level must be in 1..b (level 0 is identically 1 by
// convention). Throws std::out_of_range on a bad level.
double a_tail(const Policy &policy, const AggregateState &s, const Params &p,
              std::int64_t level);

// Join-level distribution of one arrival: p_join[i] = A_i - A_{i+1} is the
// probability of joining a server currently holding exactly i jobs
// (i = 0..b-1), p_block = A_b. Components sum to 1.
struct JoinDistribution {
    std::vector<double> p_join; // size b
    double p_block = 0.0;
};

// Throws std::domain_error if the policy emits A values outside [0,1] or
// non-monotone in the level.
JoinDistribution join_distribution(const Policy &policy, const AggregateState &s,
                                   const Params &p);

// Membership report for the three-condition policy class: (1) idle
// preference A_1 <= 1/sqrt(N) whenever s_1 <= 1 - 1/(4 N^alpha), (2)
// level-2 avoidance A_2 <= 10 (2r / N^(1-alpha))^r whenever s_2 <= 0.95,
// (3) sub-random blocking A_b <= s_b everywhere.
struct PiCondition {
    bool holds = true;
    std::optional<AggregateState> witness; // first violating state
    double margin = 0.0;                   // min over checked states of threshold - value
};

struct PiReport {
    bool member = false;
    std::int64_t r_tested = 1;
    PiCondition cond1, cond2, cond3;
};

enum class PiCheckMode { Enumerate, Analytic };

// Enumerate mode scans every state (requires C(N+b,b) <= cap; throws
// std::length_error otherwise) and works for any policy including custom
// ones. Analytic mode evaluates closed-form worst cases for the five
// built-ins and rejects custom policies.
PiReport check_pi_membership(const Policy &policy, const Params &p, std::int64_t r,
                             PiCheckMode mode, std::int64_t cap = 10'000'000);

// Thresholds of the three conditions, exposed for tests and reports.
double pi_cond1_threshold(const Params &p);                   // 1/sqrt(N)
double pi_cond1_region(const Params &p);                      // s_1 <= 1 - 1/(4 N^alpha)
double pi_cond2_threshold(const Params &p, std::int64_t r);   // 10 (2r/N^(1-alpha))^r

} // namespace lbq

#endif
