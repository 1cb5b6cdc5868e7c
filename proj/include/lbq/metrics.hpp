#ifndef LBQ_METRICS_HPP
#define LBQ_METRICS_HPP

#include <cstdint>
#include <vector>

namespace lbq {

struct Estimate {
    double value = 0.0;
    double se = 0.0; // standard error; 0 for exact results
};

// Raw per-batch tallies; identity residuals are re-batched from these.
struct BatchTotals {
    double duration = 0.0;
    std::vector<double> s_time;   // integral of (N s_i) dt, i = 1..b
    std::vector<double> h_time;   // integral of h^r dt, r = 1..r_max
    std::int64_t arrivals = 0;
    std::int64_t blocked = 0;
    std::int64_t joined_busy = 0;     // routed to a busy server (blocked included)
    std::int64_t routed_two_plus = 0; // routed to a server with >= 2 jobs
    std::int64_t wait_count = 0;      // admitted jobs with a known wait
    std::int64_t waited_count = 0;    // of those, jobs with a positive wait
    double wait_sum = 0.0;
    double waited_sum = 0.0;
};

enum class Provenance { Exact, Simulated };

// Steady-state metrics. Exact results carry zero standard errors and an
// empty batch table.
struct MetricsEstimate {
    Provenance provenance = Provenance::Simulated;
    std::vector<Estimate> es;  // E[S_i], i = 1..b
    Estimate p_wait;           // P(arrival routed to a busy server)
    Estimate p_block;          // P(arrival blocked)
    Estimate ew;               // mean wait of admitted jobs
    Estimate etq;              // mean wait of jobs that actually queue
    Estimate a2;               // E[A_2(S)] seen by arrivals
    std::vector<Estimate> eh;  // E[h_kbar^r(sum S_i)], r = 1..r_max
    double kbar = 0.0;
    std::int64_t events = 0;
    std::int64_t arrivals = 0;
    std::int64_t departures = 0;
    double measured_time = 0.0;
    double wall_seconds = 0.0;
    std::vector<BatchTotals> batches;

    double es_total() const {
        double t = 0.0;
        for (const auto &e : es) t += e.value;
        return t;
    }
};

// Field-wise equality of the reproducible payload; wall_seconds is the one
// field allowed to differ between reruns.
bool same_results(const MetricsEstimate &a, const MetricsEstimate &b);

} // namespace lbq

#endif
