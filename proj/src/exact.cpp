#include "lbq/exact.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "lbq/transitions.hpp"

namespace lbq {

std::int64_t StateSpace::index_of(const AggregateState &s) const {
    auto it = std::lower_bound(states.begin(), states.end(), s);
    if (it == states.end() || !(*it == s))
        throw std::out_of_range("state not in enumerated space: " + to_string(s));
    return static_cast<std::int64_t>(it - states.begin());
}

StateSpace enumerate_states(const Params &p, std::int64_t cap) {
    const std::int64_t size = state_space_size(p.n_servers, p.buffer_levels);
    if (size > cap)
        throw std::length_error("enumerate_states: needs " + std::to_string(size) +
                                " states, cap is " + std::to_string(cap));
    StateSpace space;
    space.params = p;
    space.states.reserve(static_cast<std::size_t>(size));
    for_each_state(p, [&](const AggregateState &s) { space.states.push_back(s); });
    return space;
}

SparseGenerator build_generator(const StateSpace &space, const Policy &policy,
                                const Params &p) {
    SparseGenerator q;
    q.n = space.size();
    q.row_begin.assign(static_cast<std::size_t>(q.n) + 1, 0);

    // Two passes over identical per-row transition lists keep the layout
    // compact without triplet sorting.
    std::vector<std::vector<std::pair<std::int64_t, double>>> rows(
        static_cast<std::size_t>(q.n));
    for (std::int64_t i = 0; i < q.n; ++i) {
        const AggregateState &src = space.states[static_cast<std::size_t>(i)];
        double exit_rate = 0.0;
        auto &row = rows[static_cast<std::size_t>(i)];
        for (const Transition &t : transitions(src, policy, p)) {
            if (t.kind == TransitionKind::ArrivalBlocked) continue; // self-loop
            const std::int64_t j = space.index_of(t.target);
            row.emplace_back(j, t.rate);
            exit_rate += t.rate;
        }
        row.emplace_back(i, -exit_rate);
        std::sort(row.begin(), row.end());
    }
    for (std::int64_t i = 0; i < q.n; ++i) {
        q.row_begin[static_cast<std::size_t>(i) + 1] =
            q.row_begin[static_cast<std::size_t>(i)] +
            static_cast<std::int64_t>(rows[static_cast<std::size_t>(i)].size());
    }
    q.col.reserve(static_cast<std::size_t>(q.row_begin.back()));
    q.value.reserve(static_cast<std::size_t>(q.row_begin.back()));
    for (auto &row : rows) {
        for (auto &[j, v] : row) {
            q.col.push_back(j);
            q.value.push_back(v);
        }
    }
    return q;
}

namespace {

// pi Q as a row vector; out[j] = sum_i pi[i] Q_ij.
void left_multiply(const SparseGenerator &q, const std::vector<double> &pi,
                   std::vector<double> &out) {
    out.assign(pi.size(), 0.0);
    for (std::int64_t i = 0; i < q.n; ++i) {
        const double w = pi[static_cast<std::size_t>(i)];
        if (w == 0.0) continue;
        for (std::int64_t k = q.row_begin[static_cast<std::size_t>(i)];
             k < q.row_begin[static_cast<std::size_t>(i) + 1]; ++k)
            out[static_cast<std::size_t>(q.col[static_cast<std::size_t>(k)])] +=
                w * q.value[static_cast<std::size_t>(k)];
    }
}

double max_abs(const std::vector<double> &v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

StationaryDistribution solve_direct(const SparseGenerator &q, double tol) {
    const auto n = static_cast<Eigen::Index>(q.n);
    // Solve Q^T pi = 0 with the last balance equation replaced by sum = 1.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(q.value.size() + static_cast<std::size_t>(q.n));
    for (std::int64_t i = 0; i < q.n; ++i)
        for (std::int64_t k = q.row_begin[static_cast<std::size_t>(i)];
             k < q.row_begin[static_cast<std::size_t>(i) + 1]; ++k) {
            const auto j = static_cast<Eigen::Index>(q.col[static_cast<std::size_t>(k)]);
            if (j == n - 1) continue;
            trip.emplace_back(j, static_cast<Eigen::Index>(i),
                              q.value[static_cast<std::size_t>(k)]);
        }
    for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(n - 1, i, 1.0);

    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(m);
    lu.factorize(m);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("stationary_distribution: singular system (reducible chain?)");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[n - 1] = 1.0;
    Eigen::VectorXd x = lu.solve(rhs);

    StationaryDistribution dist;
    dist.method = SolveMethod::DirectSolve;
    dist.pi.assign(static_cast<std::size_t>(n), 0.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = x[i];
        if (v < 0.0) {
            if (v < -1e-9)
                throw std::runtime_error("stationary_distribution: negative mass " +
                                         std::to_string(v));
            v = 0.0;
        }
        dist.pi[static_cast<std::size_t>(i)] = v;
        total += v;
    }
    for (auto &v : dist.pi) v /= total;

    std::vector<double> res;
    left_multiply(q, dist.pi, res);
    dist.residual = max_abs(res);
    if (dist.residual > tol)
        throw std::runtime_error("stationary_distribution: residual " +
                                 std::to_string(dist.residual) + " above tol");
    return dist;
}

StationaryDistribution solve_power(const SparseGenerator &q, double tol,
                                   std::int64_t max_iterations) {
    // Uniformized kernel P = I + Q/Lambda; the exit-rate bound Lambda is
    // read off the diagonal (it never exceeds lambda N + N).
    double uniformization = 0.0;
    for (std::int64_t i = 0; i < q.n; ++i)
        for (std::int64_t k = q.row_begin[static_cast<std::size_t>(i)];
             k < q.row_begin[static_cast<std::size_t>(i) + 1]; ++k)
            if (q.col[static_cast<std::size_t>(k)] == i)
                uniformization = std::max(uniformization, -q.value[static_cast<std::size_t>(k)]);
    if (uniformization <= 0.0)
        throw std::runtime_error("stationary_distribution: zero exit rates");

    StationaryDistribution dist;
    dist.method = SolveMethod::PowerIteration;
    dist.pi.assign(static_cast<std::size_t>(q.n), 1.0 / static_cast<double>(q.n));
    std::vector<double> res;
    for (std::int64_t it = 0; it < max_iterations; ++it) {
        left_multiply(q, dist.pi, res);
        if (max_abs(res) <= tol) {
            dist.iterations = it;
            double total = 0.0;
            for (double v : dist.pi) total += v;
            for (auto &v : dist.pi) v /= total;
            left_multiply(q, dist.pi, res);
            dist.residual = max_abs(res);
            return dist;
        }
        for (std::size_t j = 0; j < dist.pi.size(); ++j)
            dist.pi[j] += res[j] / uniformization;
    }
    throw std::runtime_error("stationary_distribution: power iteration did not reach tol in " +
                             std::to_string(max_iterations) + " iterations");
}

} // namespace

StationaryDistribution stationary_distribution(const SparseGenerator &q, SolveMethod method,
                                               double tol, std::int64_t max_iterations) {
    if (q.n < 1) throw std::invalid_argument("stationary_distribution: empty generator");
    if (method == SolveMethod::Auto)
        method = q.n <= 20'000 ? SolveMethod::DirectSolve : SolveMethod::PowerIteration;
    if (method == SolveMethod::DirectSolve) return solve_direct(q, tol);
    return solve_power(q, tol, max_iterations);
}

MetricsEstimate exact_metrics(const StateSpace &space, const StationaryDistribution &dist,
                              const Policy &policy, const Params &p, std::int64_t r_max,
                              double kbar) {
    const std::int64_t b = p.buffer_levels;
    MetricsEstimate m;
    m.provenance = Provenance::Exact;
    m.kbar = kbar;
    m.es.assign(static_cast<std::size_t>(b), Estimate{});
    m.eh.assign(static_cast<std::size_t>(r_max), Estimate{});

    const double shift = 1.0 + kbar * std::log(static_cast<double>(p.n_servers)) /
                                   std::pow(static_cast<double>(p.n_servers), 1.0 - p.alpha);

    double p_block = 0.0, p_wait = 0.0, a2 = 0.0;
    double jobs_ahead = 0.0, waited = 0.0;
    for (std::int64_t idx = 0; idx < space.size(); ++idx) {
        const double w = dist.pi[static_cast<std::size_t>(idx)];
        if (w == 0.0) continue;
        const AggregateState &s = space.states[static_cast<std::size_t>(idx)];
        const auto tails = tail_fractions(s, p);
        for (std::int64_t i = 0; i < b; ++i)
            m.es[static_cast<std::size_t>(i)].value += w * tails[static_cast<std::size_t>(i)];

        const JoinDistribution jd = join_distribution(policy, s, p);
        p_block += w * jd.p_block;
        p_wait += w * (1.0 - jd.p_join[0]); // routed anywhere but an idle server
        if (b >= 2) a2 += w * a_tail(policy, s, p, 2);
        for (std::int64_t i = 1; i < b; ++i) {
            const double mass = jd.p_join[static_cast<std::size_t>(i)];
            jobs_ahead += w * mass * static_cast<double>(i);
            waited += w * mass;
        }

        double total = 0.0;
        for (double s_i : tails) total += s_i;
        double h = total - shift;
        if (h < 0.0) h = 0.0;
        double hp = 1.0;
        for (std::int64_t r = 1; r <= r_max; ++r) {
            hp *= h;
            m.eh[static_cast<std::size_t>(r - 1)].value += w * hp;
        }
    }
    m.p_block.value = p_block;
    m.p_wait.value = p_wait;
    m.a2.value = a2;
    const double admitted = 1.0 - p_block;
    m.ew.value = admitted > 0.0 ? jobs_ahead / admitted : 0.0;
    m.etq.value = waited > 0.0 ? jobs_ahead / waited : 0.0;
    return m;
}

void write_pi_csv(const std::string &path, const StateSpace &space,
                  const StationaryDistribution &dist) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_pi_csv: cannot open " + path);
    const std::int64_t b = space.params.buffer_levels;
    for (std::int64_t i = 0; i <= b; ++i) out << "n" << i << ",";
    out << "probability\n";
    char buf[64];
    for (std::int64_t idx = 0; idx < space.size(); ++idx) {
        const AggregateState &s = space.states[static_cast<std::size_t>(idx)];
        for (auto c : s.counts) out << c << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", dist.pi[static_cast<std::size_t>(idx)]);
        out << buf << "\n";
    }
}

bool same_results(const MetricsEstimate &a, const MetricsEstimate &b) {
    auto est_eq = [](const Estimate &x, const Estimate &y) {
        return x.value == y.value && x.se == y.se;
    };
    if (a.provenance != b.provenance || a.es.size() != b.es.size() ||
        a.eh.size() != b.eh.size() || a.kbar != b.kbar || a.events != b.events ||
        a.arrivals != b.arrivals || a.departures != b.departures ||
        a.measured_time != b.measured_time)
        return false;
    for (std::size_t i = 0; i < a.es.size(); ++i)
        if (!est_eq(a.es[i], b.es[i])) return false;
    for (std::size_t i = 0; i < a.eh.size(); ++i)
        if (!est_eq(a.eh[i], b.eh[i])) return false;
    return est_eq(a.p_wait, b.p_wait) && est_eq(a.p_block, b.p_block) &&
           est_eq(a.ew, b.ew) && est_eq(a.etq, b.etq) && est_eq(a.a2, b.a2);
}

} // namespace lbq
