#ifndef LBQ_SIMULATE_HPP
#define LBQ_SIMULATE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lbq/metrics.hpp"
#include "lbq/params.hpp"
#include "lbq/policy.hpp"
#include "lbq/rng.hpp"
#include "lbq/state.hpp"

namespace lbq {

enum class SimMode { Aggregate, PerServer };

// Exponential holding times simulate the chain literally; MeanHolding
// replaces each holding time by its conditional mean 1/R(s) (the embedded
// chain weighted by expected sojourn), which estimates the same time
// averages with less variance and no log() per event.
enum class HoldingTimes { Exponential, MeanHolding };

struct SimConfig {
    double horizon = 1000.0;  // simulated time units
    double warmup = 10.0;     // discarded prefix
    std::int64_t batches = 20;
    std::uint64_t seed = 0;
    SimMode mode = SimMode::Aggregate;
    HoldingTimes holding = HoldingTimes::Exponential;
    std::int64_t r_max = 1;          // highest tracked moment of h
    std::optional<double> kbar;      // defaults to 32*r_max*b + 1
    std::int64_t replicas = 1;       // independent replicas pooled into one estimate
    std::uint64_t point_index = 0;   // sweep stream key
    std::int64_t workers = 1;        // parallelism over replicas
};

// Single simulation run (or pooled replicas). Deterministic for fixed
// (policy, params, cfg): replica streams are keyed by (seed, point_index,
// replica, mode), so the result is independent of worker count.
// Throws std::invalid_argument on bad config and std::runtime_error when
// the horizon cannot fill every batch with at least one arrival.
MetricsEstimate simulate(const Policy &policy, const Params &p, const SimConfig &cfg);

struct SweepPoint {
    Policy policy;
    Params params;
    SimConfig cfg;
};

struct SweepResult {
    std::optional<MetricsEstimate> metrics;
    std::string error; // nonempty on failure; other points are unaffected
};

// Runs all points, optionally with a worker pool. Per-point streams are
// keyed by (cfg.seed, point index), so results do not depend on the worker
// count or completion order.
std::vector<SweepResult> simulate_sweep(const std::vector<SweepPoint> &points,
                                        std::int64_t workers = 1);

struct ModeComparison {
    std::string metric;
    Estimate aggregate;
    Estimate per_server;
    double z = 0.0;
};

struct CrossCheckReport {
    std::vector<ModeComparison> rows;
    bool agree = true; // all |z| <= 4
};

// Runs aggregate and per-server modes on independent streams and compares
// every shared metric by z-score.
CrossCheckReport cross_check_modes(const Policy &policy, const Params &p,
                                   const SimConfig &cfg);

// Event-driven core over the occupancy histogram, exposed so callers can
// advance a run in segments; simulate() wraps it. The pending next-event
// time is carried across segment boundaries, so splitting the horizon
// leaves the sample path unchanged.
class AggregateEngine {
public:
    AggregateEngine(const Policy &policy, const Params &p, const SimConfig &cfg,
                    Rng rng);

    void advance_to(double t); // process events up to time t
    double now() const { return now_; }
    const AggregateState &state() const { return state_; }
    const std::vector<BatchTotals> &batches() const { return batches_; }
    std::int64_t events() const { return events_; }
    std::int64_t arrivals() const { return arrivals_; }
    std::int64_t departures() const { return departures_; }

    // Metrics over (warmup, now]; call once the horizon is reached.
    MetricsEstimate finish(double wall_seconds) const;

private:
    void apply_arrival(double u);
    void apply_departure(double x);
    void accumulate(double from, double to);

    Policy policy_;
    Params params_;
    SimConfig cfg_;
    Rng rng_;
    AggregateState state_;
    std::vector<std::int64_t> tails_; // tails_[i] = # servers with >= i jobs
    std::int64_t jobs_ = 0;           // total jobs in the system
    std::int64_t min_level_ = 0;      // lowest occupancy present
    double now_ = 0.0;
    double pending_time_ = 0.0;
    bool pending_ = false;
    std::int64_t events_ = 0, arrivals_ = 0, departures_ = 0;
    std::vector<BatchTotals> batches_;
    double batch_len_ = 0.0;
    double kbar_ = 0.0;
    double h_shift_ = 0.0; // 1 + kbar log N / N^(1-alpha)
    double h_thr_ = 0.0;   // h_shift * N, jobs threshold for a nonzero h
    double inv_n_ = 0.0;
};

} // namespace lbq

#endif
