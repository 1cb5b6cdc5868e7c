#include "lbq/analysis.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "lbq/transitions.hpp"

namespace lbq {

namespace {

double n_pow(const Params &p, double e) {
    return std::pow(static_cast<double>(p.n_servers), e);
}

double log_n(const Params &p) { return std::log(static_cast<double>(p.n_servers)); }

} // namespace

BoundParams make_bound_params(std::int64_t r, const Params &p, std::optional<double> kbar) {
    if (r < 1) throw std::invalid_argument("make_bound_params: r must be >= 1");
    BoundParams bp;
    bp.r = r;
    bp.k = 32.0 * static_cast<double>(r) * static_cast<double>(p.buffer_levels) + 1.0;
    bp.kbar = kbar.value_or(bp.k);
    const double slack = static_cast<double>(r) / (n_pow(p, p.alpha) * log_n(p));
    if (bp.kbar > bp.k || (p.n_servers > 1 && bp.kbar < bp.k - slack))
        throw std::invalid_argument("make_bound_params: kbar outside [k - r/(N^a log N), k]");
    return bp;
}

double log_shift(const Params &p, double kbar) {
    return kbar * log_n(p) / n_pow(p, 1.0 - p.alpha);
}

double h_trunc(double x, const BoundParams &bp, const Params &p) {
    const double v = x - 1.0 - log_shift(p, bp.kbar);
    return v > 0.0 ? v : 0.0;
}

double lyapunov_v(const AggregateState &s, const BoundParams &bp, const Params &p) {
    double queued = 0.0; // sum_{i>=2} s_i
    const auto tails = tail_fractions(s, p);
    for (std::size_t i = 1; i < tails.size(); ++i) queued += tails[i];
    const double first = queued - log_shift(p, bp.kbar);
    const double second = 1.0 - tails[0];
    return first < second ? first : second;
}

double drift_v(const AggregateState &s, const Policy &policy, const Params &p,
               const BoundParams &bp) {
    const double v0 = lyapunov_v(s, bp, p);
    double drift = 0.0;
    for (const Transition &t : transitions(s, policy, p)) {
        if (t.kind == TransitionKind::ArrivalBlocked) continue;
        drift += t.rate * (lyapunov_v(t.target, bp, p) - v0);
    }
    return drift;
}

namespace {

double drift_bound_rhs(const Params &p, const BoundParams &bp) {
    return 2.0 / std::sqrt(static_cast<double>(p.n_servers)) -
           (bp.k / static_cast<double>(p.buffer_levels)) * log_n(p) / n_pow(p, 1.0 - p.alpha);
}

} // namespace

VerificationReport drift_v_report(const AggregateState &s, const Policy &policy,
                                  const Params &p, const BoundParams &bp,
                                  std::optional<bool> pi_member) {
    const bool member = pi_member.value_or(
        policy.kind != PolicyKind::Custom &&
        check_pi_membership(policy, p, bp.r, PiCheckMode::Analytic).member);
    VerificationReport rep;
    rep.claim = "drift-bound";
    rep.provenance = Provenance::Exact;
    rep.lhs = drift_v(s, policy, p, bp);
    rep.rhs = drift_bound_rhs(p, bp);
    const bool in_region = lyapunov_v(s, bp, p) >= 1.0 / (4.0 * n_pow(p, p.alpha));
    rep.premise_holds = in_region && member;
    if (rep.premise_holds) rep.satisfied = rep.lhs <= rep.rhs;
    if (!member) rep.note = "policy not in the checked class";
    return rep;
}

DriftScan drift_bound_scan(const Policy &policy, const Params &p, const BoundParams &bp,
                           std::int64_t cap, std::optional<bool> pi_member) {
    const std::int64_t size = state_space_size(p.n_servers, p.buffer_levels);
    if (size > cap)
        throw std::length_error("drift_bound_scan: state space has " + std::to_string(size) +
                                " states, cap is " + std::to_string(cap));
    const bool member = pi_member.value_or(
        policy.kind != PolicyKind::Custom &&
        check_pi_membership(policy, p, bp.r, PiCheckMode::Analytic).member);
    const double region = 1.0 / (4.0 * n_pow(p, p.alpha));

    DriftScan scan;
    scan.report.claim = "drift-bound";
    scan.report.provenance = Provenance::Exact;
    scan.report.rhs = drift_bound_rhs(p, bp);
    double worst = -std::numeric_limits<double>::infinity();
    for_each_state(p, [&](const AggregateState &s) {
        ++scan.states_checked;
        if (lyapunov_v(s, bp, p) < region) return;
        ++scan.states_qualifying;
        const double d = drift_v(s, policy, p, bp);
        if (d > worst) {
            worst = d;
            scan.worst_state = s;
        }
    });
    scan.report.lhs = scan.states_qualifying > 0 ? worst : 0.0;
    scan.report.premise_holds = member;
    if (member)
        scan.report.satisfied =
            scan.states_qualifying == 0 || scan.report.lhs <= scan.report.rhs;
    if (scan.states_qualifying == 0)
        scan.report.note = "no state reaches the drift region at this scale";
    return scan;
}

double lyapunov_tail_prob(const StateSpace &space, const StationaryDistribution &dist,
                          const BoundParams &bp, double threshold) {
    double prob = 0.0;
    for (std::int64_t i = 0; i < space.size(); ++i)
        if (lyapunov_v(space.states[static_cast<std::size_t>(i)], bp, space.params) >=
            threshold)
            prob += dist.pi[static_cast<std::size_t>(i)];
    return prob;
}

bool moment_bound_premise(const Params &p, std::int64_t r) {
    return n_pow(p, 1.0 - p.alpha) / (32.0 * log_n(p)) > static_cast<double>(r);
}

bool s3_bound_premise(const Params &p, const BoundParams &bp) {
    return n_pow(p, 1.0 - p.alpha) / (bp.k * log_n(p)) >= 5.0;
}

bool waiting_bound_premise(const Params &p, std::int64_t r) {
    return n_pow(p, 1.0 - p.alpha) >=
           3.0 * std::pow(40.0, static_cast<double>(r) / 2.0) * static_cast<double>(r);
}

VerificationReport ssc_tail(const StateSpace &space, const StationaryDistribution &dist,
                            const BoundParams &bp, const Params &p) {
    VerificationReport rep;
    rep.claim = "ssc-tail";
    rep.provenance = Provenance::Exact;
    rep.premise_holds = moment_bound_premise(p, bp.r);
    rep.lhs = lyapunov_tail_prob(space, dist, bp, 1.0 / (2.0 * n_pow(p, p.alpha)));
    rep.rhs = n_pow(p, -2.0 * static_cast<double>(bp.r));
    if (rep.premise_holds) rep.satisfied = rep.lhs <= rep.rhs;
    return rep;
}

GeometricTail geometric_tail_bound(const Params &p, const BoundParams &bp, std::int64_t j) {
    if (j < 0) throw std::invalid_argument("geometric_tail_bound: j must be >= 0");
    GeometricTail g;
    g.premise_holds = moment_bound_premise(p, bp.r);
    // q_max <= N and nu_max <= 1/N make q_max*nu_max = 1.
    g.gamma = ((bp.k - 1.0) / static_cast<double>(p.buffer_levels)) * log_n(p) /
              n_pow(p, 1.0 - p.alpha);
    g.bound = std::pow(1.0 / (1.0 + g.gamma), static_cast<double>(j + 1));
    return g;
}

VerificationReport verify_moment_bound(const MetricsEstimate &metrics, const Params &p,
                                         const BoundParams &bp) {
    if (bp.r > static_cast<std::int64_t>(metrics.eh.size()))
        throw std::invalid_argument("verify_moment_bound: metrics lack E[h^r] at r");
    if (metrics.kbar != bp.kbar)
        throw std::invalid_argument("verify_moment_bound: metrics kbar differs from bound kbar");
    VerificationReport rep;
    rep.claim = "moment-bound-r" + std::to_string(bp.r);
    rep.provenance = metrics.provenance;
    rep.premise_holds = moment_bound_premise(p, bp.r);
    const Estimate &lhs = metrics.eh[static_cast<std::size_t>(bp.r - 1)];
    rep.lhs = lhs.value;
    rep.lhs_se = lhs.se;
    rep.rhs = 10.0 * std::pow(2.0 * static_cast<double>(bp.r) / n_pow(p, 1.0 - p.alpha),
                              static_cast<double>(bp.r));
    if (rep.premise_holds) rep.satisfied = rep.lhs <= rep.rhs + 3.0 * rep.lhs_se;
    return rep;
}

std::vector<VerificationReport> verify_scaling_bounds(const MetricsEstimate &metrics,
                                                   const Params &p, const BoundParams &bp) {
    const double n = static_cast<double>(p.n_servers);
    const double n1a = n_pow(p, 1.0 - p.alpha);
    const double r = static_cast<double>(bp.r);
    const double root_term = 10.0 * std::pow(3.0 * r / n1a, r / 2.0);
    std::vector<VerificationReport> out;

    auto gated = [&](const std::string &claim, bool premise, const Estimate &lhs,
                     double rhs, bool lower_bound = false) {
        VerificationReport rep;
        rep.claim = claim;
        rep.provenance = metrics.provenance;
        rep.premise_holds = premise;
        rep.lhs = lhs.value;
        rep.lhs_se = lhs.se;
        rep.rhs = rhs;
        if (premise)
            rep.satisfied = lower_bound ? rhs <= lhs.value + 3.0 * lhs.se
                                        : lhs.value <= rhs + 3.0 * lhs.se;
        out.push_back(std::move(rep));
    };

    // E[S_3] <= 20 (3r/N^(1-a))^r; S_3 is identically zero when b < 3.
    Estimate s3 = p.buffer_levels >= 3 ? metrics.es[2] : Estimate{};
    gated("s3-bound", s3_bound_premise(p, bp), s3,
          20.0 * std::pow(3.0 * r / n1a, r));

    const bool wait_premise = waiting_bound_premise(p, bp.r);
    gated("waiting-time", wait_premise, metrics.ew, 4.0 * bp.k * log_n(p) / n1a);
    gated("waiting-probability", wait_premise, metrics.p_wait,
          2.0 * root_term + 2.0 * bp.k * log_n(p) / n1a);

    // lambda N - 10 N (3r/N^(1-a))^(r/2) <= E[N S_1] <= lambda N; the upper
    // branch is work conservation and holds unconditionally.
    Estimate ns1{metrics.es[0].value * n, metrics.es[0].se * n};
    gated("busy-servers-upper", true, ns1, p.lambda * n);
    gated("busy-servers-lower", wait_premise, ns1, p.lambda * n - n * root_term,
          /*lower_bound=*/true);

    if (p.buffer_levels >= 2) {
        Estimate ns2{metrics.es[1].value * n, metrics.es[1].se * n};
        gated("queued-servers", wait_premise, ns2,
              n * root_term + 2.0 * bp.k * n_pow(p, p.alpha) * log_n(p));
    }
    return out;
}

namespace {

VerificationReport residual_report(const std::string &claim, Provenance prov, double lhs,
                                   double rhs, double se) {
    VerificationReport rep;
    rep.claim = claim;
    rep.provenance = prov;
    rep.premise_holds = true;
    rep.lhs = lhs;
    rep.rhs = rhs;
    rep.lhs_se = se;
    const double slack = prov == Provenance::Exact ? 1e-10 : 3.0 * se;
    rep.satisfied = std::abs(lhs - rhs) <= slack;
    return rep;
}

// Recomputes an identity per batch to get a batch-means SE of the residual.
double residual_se(const MetricsEstimate &m,
                   const std::function<double(const BatchTotals &)> &residual) {
    if (m.batches.empty()) return 0.0;
    std::vector<double> vals;
    vals.reserve(m.batches.size());
    for (const auto &b : m.batches)
        if (b.arrivals > 0 && b.duration > 0.0) vals.push_back(residual(b));
    if (vals.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(vals.size() - 1)) /
           std::sqrt(static_cast<double>(vals.size()));
}

} // namespace

std::vector<VerificationReport> verify_identities(const MetricsEstimate &m, const Params &p) {
    const double n = static_cast<double>(p.n_servers);
    const double lambda = p.lambda;
    const std::int64_t b = p.buffer_levels;
    std::vector<VerificationReport> out;

    // E[S_3] = lambda (E[A_2] - E[A_b]); trivially 0 = 0 when b <= 2.
    {
        const double s3 = b >= 3 ? m.es[2].value : 0.0;
        const double rhs = b >= 2 ? lambda * (m.a2.value - m.p_block.value) : 0.0;
        double se = 0.0;
        if (m.provenance == Provenance::Simulated)
            se = residual_se(m, [&](const BatchTotals &bt) {
                const double s3b = b >= 3 ? bt.s_time[2] / (n * bt.duration) : 0.0;
                const double a2b =
                    static_cast<double>(bt.routed_two_plus) / static_cast<double>(bt.arrivals);
                const double abb =
                    static_cast<double>(bt.blocked) / static_cast<double>(bt.arrivals);
                return s3b - lambda * (a2b - abb);
            });
        out.push_back(residual_report("s3-identity", m.provenance, s3, rhs, se));
    }
    // Work conservation E[S_1] = lambda (1 - p_B).
    {
        double se = 0.0;
        if (m.provenance == Provenance::Simulated)
            se = residual_se(m, [&](const BatchTotals &bt) {
                const double s1b = bt.s_time[0] / (n * bt.duration);
                const double pbb =
                    static_cast<double>(bt.blocked) / static_cast<double>(bt.arrivals);
                return s1b - lambda * (1.0 - pbb);
            });
        out.push_back(residual_report("work-conservation", m.provenance, m.es[0].value,
                                      lambda * (1.0 - m.p_block.value), se));
    }
    // Little's law for the whole system: E[sum S_i] = lambda(1-p_B)(1+E[W]).
    {
        const double lhs = m.es_total();
        const double rhs = lambda * (1.0 - m.p_block.value) * (1.0 + m.ew.value);
        double se = 0.0;
        if (m.provenance == Provenance::Simulated)
            se = residual_se(m, [&](const BatchTotals &bt) {
                double tot = 0.0;
                for (double s : bt.s_time) tot += s;
                tot /= n * bt.duration;
                const double pbb =
                    static_cast<double>(bt.blocked) / static_cast<double>(bt.arrivals);
                const double ewb =
                    bt.wait_count > 0 ? bt.wait_sum / static_cast<double>(bt.wait_count) : 0.0;
                return tot - lambda * (1.0 - pbb) * (1.0 + ewb);
            });
        out.push_back(residual_report("littles-law", m.provenance, lhs, rhs, se));
    }
    // Little's law for the waiting room: lambda (p_W - p_B) E[T_Q] = E[sum_{i>=2} S_i].
    {
        double queued = 0.0;
        for (std::int64_t i = 2; i <= b; ++i) queued += m.es[static_cast<std::size_t>(i - 1)].value;
        const double lhs = lambda * (m.p_wait.value - m.p_block.value) * m.etq.value;
        double se = 0.0;
        if (m.provenance == Provenance::Simulated)
            se = residual_se(m, [&](const BatchTotals &bt) {
                double q = 0.0;
                for (std::size_t i = 1; i < bt.s_time.size(); ++i) q += bt.s_time[i];
                q /= n * bt.duration;
                const double arr = static_cast<double>(bt.arrivals);
                const double pwb = static_cast<double>(bt.joined_busy) / arr -
                                   static_cast<double>(bt.blocked) / arr;
                const double etqb = bt.waited_count > 0
                                        ? bt.waited_sum / static_cast<double>(bt.waited_count)
                                        : 0.0;
                return lambda * pwb * etqb - q;
            });
        out.push_back(residual_report("littles-law-waiting", m.provenance, lhs, queued, se));
    }
    return out;
}

std::vector<VerificationReport> verify_identities_exact(const StateSpace &space,
                                                        const StationaryDistribution &dist,
                                                        const Policy &policy,
                                                        const Params &p) {
    const BoundParams bp = make_bound_params(1, p);
    MetricsEstimate m = exact_metrics(space, dist, policy, p, 1, bp.kbar);
    return verify_identities(m, p);
}

DriftStationarity drift_stationarity(const StateSpace &space,
                                     const StationaryDistribution &dist,
                                     const Policy &policy, const Params &p,
                                     const BoundParams &bp) {
    DriftStationarity out;
    double v_sum = 0.0, f_sum = 0.0;
    for (std::int64_t idx = 0; idx < space.size(); ++idx) {
        const double w = dist.pi[static_cast<std::size_t>(idx)];
        if (w == 0.0) continue;
        const AggregateState &s = space.states[static_cast<std::size_t>(idx)];
        v_sum += w * drift_v(s, policy, p, bp);
        // f(s) = sum_{i>=3} s_i, via the same transition sums.
        auto f = [&](const AggregateState &st) {
            double acc = 0.0;
            for (std::int64_t i = 3; i <= p.buffer_levels; ++i)
                acc += tail_fraction(st, p, i);
            return acc;
        };
        const double f0 = f(s);
        double df = 0.0;
        for (const Transition &t : transitions(s, policy, p)) {
            if (t.kind == TransitionKind::ArrivalBlocked) continue;
            df += t.rate * (f(t.target) - f0);
        }
        f_sum += w * df;
    }
    out.v_residual = std::abs(v_sum);
    out.s3_identity_residual = std::abs(f_sum);
    return out;
}

} // namespace lbq
