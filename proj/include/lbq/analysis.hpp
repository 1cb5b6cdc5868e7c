#ifndef LBQ_ANALYSIS_HPP
#define LBQ_ANALYSIS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lbq/exact.hpp"
#include "lbq/metrics.hpp"
#include "lbq/params.hpp"
#include "lbq/policy.hpp"
#include "lbq/state.hpp"

namespace lbq {

// Parameters of the truncated-distance metric h and the Lyapunov function:
// r is the moment order, k = 32*r*b + 1, and kbar may sit slightly below k
// (at least k - r/(N^alpha log N)).
struct BoundParams {
    std::int64_t r = 1;
    double k = 0.0;
    double kbar = 0.0;
};

// Throws std::invalid_argument on r < 1 or kbar outside its window.
BoundParams make_bound_params(std::int64_t r, const Params &p,
                              std::optional<double> kbar = std::nullopt);

struct VerificationReport {
    std::string claim;
    bool premise_holds = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double lhs_se = 0.0;                 // 0 for exact provenance
    std::optional<bool> satisfied;        // present iff premise_holds
    Provenance provenance = Provenance::Exact;
    std::string note;
};

// log N / N^(1-alpha) offset used by both h and V; natural log.
double log_shift(const Params &p, double kbar);

// h_kbar(x) = max(x - 1 - kbar log N / N^(1-alpha), 0).
double h_trunc(double x, const BoundParams &bp, const Params &p);

// V(s) = min(sum_{i>=2} s_i - kbar log N / N^(1-alpha), 1 - s_1).
double lyapunov_v(const AggregateState &s, const BoundParams &bp, const Params &p);

// Drift of V at s: sum over outgoing transitions of rate * (V(s') - V(s)).
double drift_v(const AggregateState &s, const Policy &policy, const Params &p,
               const BoundParams &bp);

// Per-state drift bound report: premise is V(s) >= 1/(4 N^alpha) together
// with membership of the policy in the three-condition class at r; the
// bound is 2/sqrt(N) - (k/b) log N / N^(1-alpha).
VerificationReport drift_v_report(const AggregateState &s, const Policy &policy,
                                  const Params &p, const BoundParams &bp,
                                  std::optional<bool> pi_member = std::nullopt);

// Exhaustive drift check over every state with V >= 1/(4 N^alpha);
// lhs = worst drift among qualifying states (0 if none qualify).
struct DriftScan {
    VerificationReport report;
    std::int64_t states_checked = 0;
    std::int64_t states_qualifying = 0;
    std::optional<AggregateState> worst_state;
};
DriftScan drift_bound_scan(const Policy &policy, const Params &p, const BoundParams &bp,
                           std::int64_t cap = 10'000'000,
                           std::optional<bool> pi_member = std::nullopt);

// Pr(V(S) >= t) under pi.
double lyapunov_tail_prob(const StateSpace &space, const StationaryDistribution &dist,
                          const BoundParams &bp, double threshold);

// Tail bound check: Pr(V >= 1/(2 N^alpha)) <= N^(-2r), gated on
// N^(1-alpha)/(32 log N) > r.
VerificationReport ssc_tail(const StateSpace &space, const StationaryDistribution &dist,
                            const BoundParams &bp, const Params &p);

// Geometric tail value (q_max nu_max / (q_max nu_max + gamma))^(j+1) with
// q_max = N, nu_max = 1/N, gamma = ((k-1)/b) log N / N^(1-alpha); premise as
// in ssc_tail. No valid bound is emitted when the premise fails.
struct GeometricTail {
    bool premise_holds = false;
    double bound = 0.0;
    double gamma = 0.0;
};
GeometricTail geometric_tail_bound(const Params &p, const BoundParams &bp, std::int64_t j);

// Premise gates, pure in (N, alpha, b, r).
bool moment_bound_premise(const Params &p, std::int64_t r);  // N^(1-alpha)/(32 log N) > r
bool s3_bound_premise(const Params &p, const BoundParams &bp); // N^(1-alpha)/(k log N) >= 5
bool waiting_bound_premise(const Params &p, std::int64_t r);  // N^(1-alpha) >= 3*40^(r/2)*r

// E[h_k^r] <= 10 (2r/N^(1-alpha))^r, premise-gated; the lhs and rhs are
// reported either way. Simulated assertions get one-sided 3-SE slack.
VerificationReport verify_moment_bound(const MetricsEstimate &metrics, const Params &p,
                                         const BoundParams &bp);

// Derived scaling bounds: E[S_3], E[W], p_W, the two-sided E[N S_1] bracket,
// and E[N S_2]; each gated on its own premise.
std::vector<VerificationReport> verify_scaling_bounds(const MetricsEstimate &metrics,
                                                   const Params &p, const BoundParams &bp);

// Exactly-held steady-state identities: E[S_3] = lambda E[A_2 - A_b], work
// conservation E[S_1] = lambda (1 - p_B), Little's law for the whole system
// and for the waiting room. For exact provenance the residual tolerance is
// 1e-10; simulated residuals are asserted within 3 SE.
std::vector<VerificationReport> verify_identities(const MetricsEstimate &metrics,
                                                  const Params &p);

// Identity inputs E[A_2(S)] and E[A_b(S)] are exact-only; this overload
// computes them from pi along with everything verify_identities needs.
std::vector<VerificationReport> verify_identities_exact(const StateSpace &space,
                                                        const StationaryDistribution &dist,
                                                        const Policy &policy,
                                                        const Params &p);

// Stationarity of drifts: sum_s pi(s) Delta f(s) for f = V and
// f = sum_{i>=3} s_i; both vanish at stationarity.
struct DriftStationarity {
    double v_residual = 0.0;
    double s3_identity_residual = 0.0; // |E[S_3] - lambda E[A_2 - A_b]| via transitions
};
DriftStationarity drift_stationarity(const StateSpace &space,
                                     const StationaryDistribution &dist,
                                     const Policy &policy, const Params &p,
                                     const BoundParams &bp);

} // namespace lbq

#endif
