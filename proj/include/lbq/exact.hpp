#ifndef LBQ_EXACT_HPP
#define LBQ_EXACT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lbq/metrics.hpp"
#include "lbq/params.hpp"
#include "lbq/policy.hpp"
#include "lbq/state.hpp"

namespace lbq {

// Enumerated state space in lexicographic order of the counts vector.
// Indices are stable across runs and solver methods.
struct StateSpace {
    Params params;
    std::vector<AggregateState> states;

    std::int64_t size() const { return static_cast<std::int64_t>(states.size()); }
    // Ordinal of a state via binary search; throws std::out_of_range if absent.
    std::int64_t index_of(const AggregateState &s) const;
};

// Throws std::length_error when C(N+b, b) > cap; the message carries the
// required size.
StateSpace enumerate_states(const Params &p, std::int64_t cap = 10'000'000);

// Sparse generator in row-compressed form; row = source state. Blocked
// arrivals are self-loops and contribute nothing, so every row sums to zero
// and holds at most 2b+1 entries.
struct SparseGenerator {
    std::int64_t n = 0;
    std::vector<std::int64_t> row_begin; // size n+1
    std::vector<std::int64_t> col;
    std::vector<double> value;
};

SparseGenerator build_generator(const StateSpace &space, const Policy &policy,
                                const Params &p);

enum class SolveMethod { Auto, DirectSolve, PowerIteration };

struct StationaryDistribution {
    std::vector<double> pi;
    double residual = 0.0; // max |(pi Q)_j|
    SolveMethod method = SolveMethod::DirectSolve;
    std::int64_t iterations = 0; // power iteration only
};

// Solves pi Q = 0, sum(pi) = 1. Direct solve replaces one balance equation
// with the normalization; power iteration uses the uniformized kernel
// P = I + Q/(lambda N + N). Auto picks direct for |S| <= 20000.
// Throws std::runtime_error on non-convergence or a singular system.
StationaryDistribution stationary_distribution(const SparseGenerator &q,
                                               SolveMethod method = SolveMethod::Auto,
                                               double tol = 1e-12,
                                               std::int64_t max_iterations = 50'000'000);

// Exact steady-state metrics from pi (all standard errors zero).
// kbar/r_max control the truncated-distance moments E[h^r].
MetricsEstimate exact_metrics(const StateSpace &space, const StationaryDistribution &dist,
                              const Policy &policy, const Params &p,
                              std::int64_t r_max, double kbar);

// pi as CSV: one column per histogram cell plus the probability.
void write_pi_csv(const std::string &path, const StateSpace &space,
                  const StationaryDistribution &dist);

} // namespace lbq

#endif
