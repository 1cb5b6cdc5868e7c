#include "lbq/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace lbq {

namespace {

double default_kbar(const SimConfig &cfg, const Params &p) {
    if (cfg.kbar) return *cfg.kbar;
    return 32.0 * static_cast<double>(cfg.r_max) * static_cast<double>(p.buffer_levels) + 1.0;
}

void validate_config(const Policy &policy, const Params &p, const SimConfig &cfg) {
    if (!(cfg.warmup >= 0.0) || !(cfg.horizon > cfg.warmup))
        throw std::invalid_argument("simulate: need 0 <= warmup < horizon");
    if (cfg.batches < 2) throw std::invalid_argument("simulate: need batches >= 2");
    if (cfg.r_max < 1) throw std::invalid_argument("simulate: need r_max >= 1");
    if (cfg.replicas < 1) throw std::invalid_argument("simulate: need replicas >= 1");
    if (policy.kind == PolicyKind::Custom && !policy.custom_a)
        throw std::invalid_argument("simulate: policy has no routing rule");
    (void)p;
}

std::vector<BatchTotals> make_batches(const Params &p, const SimConfig &cfg) {
    std::vector<BatchTotals> batches(static_cast<std::size_t>(cfg.batches));
    for (auto &b : batches) {
        b.s_time.assign(static_cast<std::size_t>(p.buffer_levels), 0.0);
        b.h_time.assign(static_cast<std::size_t>(cfg.r_max), 0.0);
    }
    return batches;
}

std::size_t batch_index(const SimConfig &cfg, double batch_len, double t) {
    auto idx = static_cast<std::int64_t>((t - cfg.warmup) / batch_len);
    if (idx < 0) idx = 0;
    if (idx >= cfg.batches) idx = cfg.batches - 1;
    return static_cast<std::size_t>(idx);
}

// Adds the piecewise-constant integrands over [from, to), splitting across
// batch boundaries and clipping at the warmup edge.
void accumulate_interval(const Params &p, const SimConfig &cfg, double batch_len,
                         std::vector<BatchTotals> &batches,
                         const std::vector<std::int64_t> &tails, std::int64_t jobs,
                         double h_shift, double h_thr, double inv_n,
                         double from, double to) {
    if (to <= cfg.warmup) return;
    if (from < cfg.warmup) from = cfg.warmup;
    const std::int64_t b = p.buffer_levels;
    while (from < to) {
        const std::size_t idx = batch_index(cfg, batch_len, from);
        double end = to;
        if (idx + 1 < batches.size()) {
            const double boundary = cfg.warmup + static_cast<double>(idx + 1) * batch_len;
            if (boundary < end) end = boundary;
            if (end <= from) end = to; // guards a stuck boundary from rounding
        }
        const double dt = end - from;
        BatchTotals &bt = batches[idx];
        bt.duration += dt;
        for (std::int64_t i = 0; i < b; ++i)
            bt.s_time[static_cast<std::size_t>(i)] +=
                static_cast<double>(tails[static_cast<std::size_t>(i + 1)]) * dt;
        if (static_cast<double>(jobs) > h_thr) {
            const double h = static_cast<double>(jobs) * inv_n - h_shift;
            if (h > 0.0) {
                double hp = 1.0;
                for (std::int64_t r = 0; r < cfg.r_max; ++r) {
                    hp *= h;
                    bt.h_time[static_cast<std::size_t>(r)] += hp * dt;
                }
            }
        }
        from = end;
    }
}

double batch_sd(const std::vector<double> &means) {
    if (means.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : means) m += x;
    m /= static_cast<double>(means.size());
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(means.size() - 1));
}

Estimate ratio_estimate(const std::vector<BatchTotals> &batches,
                        const std::function<double(const BatchTotals &)> &num,
                        const std::function<double(const BatchTotals &)> &den) {
    double nsum = 0.0, dsum = 0.0;
    std::vector<double> means;
    means.reserve(batches.size());
    for (const auto &b : batches) {
        const double d = den(b);
        nsum += num(b);
        dsum += d;
        if (d > 0.0) means.push_back(num(b) / d);
    }
    Estimate e;
    e.value = dsum > 0.0 ? nsum / dsum : 0.0;
    e.se = means.empty() ? 0.0
                         : batch_sd(means) / std::sqrt(static_cast<double>(means.size()));
    return e;
}

MetricsEstimate pool_metrics(const Params &p, const SimConfig &cfg, double kbar,
                             std::vector<BatchTotals> batches, std::int64_t events,
                             std::int64_t arrivals, std::int64_t departures,
                             double measured_time, double wall_seconds) {
    for (std::size_t i = 0; i < batches.size(); ++i)
        if (batches[i].arrivals == 0)
            throw std::runtime_error(
                "simulate: batch " + std::to_string(i) +
                " contains no arrivals; lengthen the horizon or lower batches");

    MetricsEstimate m;
    m.provenance = Provenance::Simulated;
    m.kbar = kbar;
    m.events = events;
    m.arrivals = arrivals;
    m.departures = departures;
    m.measured_time = measured_time;
    m.wall_seconds = wall_seconds;

    const double n = static_cast<double>(p.n_servers);
    m.es.resize(static_cast<std::size_t>(p.buffer_levels));
    for (std::int64_t i = 0; i < p.buffer_levels; ++i) {
        const auto fi = static_cast<std::size_t>(i);
        m.es[fi] = ratio_estimate(
            batches, [fi, n](const BatchTotals &b) { return b.s_time[fi] / n; },
            [](const BatchTotals &b) { return b.duration; });
    }
    m.eh.resize(static_cast<std::size_t>(cfg.r_max));
    for (std::int64_t r = 0; r < cfg.r_max; ++r) {
        const auto fr = static_cast<std::size_t>(r);
        m.eh[fr] = ratio_estimate(
            batches, [fr](const BatchTotals &b) { return b.h_time[fr]; },
            [](const BatchTotals &b) { return b.duration; });
    }
    auto arr = [](const BatchTotals &b) { return static_cast<double>(b.arrivals); };
    m.p_wait = ratio_estimate(
        batches, [](const BatchTotals &b) { return static_cast<double>(b.joined_busy); },
        arr);
    m.p_block = ratio_estimate(
        batches, [](const BatchTotals &b) { return static_cast<double>(b.blocked); }, arr);
    m.a2 = ratio_estimate(
        batches,
        [](const BatchTotals &b) { return static_cast<double>(b.routed_two_plus); }, arr);
    m.ew = ratio_estimate(
        batches, [](const BatchTotals &b) { return b.wait_sum; },
        [](const BatchTotals &b) { return static_cast<double>(b.wait_count); });
    m.etq = ratio_estimate(
        batches, [](const BatchTotals &b) { return b.waited_sum; },
        [](const BatchTotals &b) { return static_cast<double>(b.waited_count); });
    m.batches = std::move(batches);
    return m;
}

} // namespace

AggregateEngine::AggregateEngine(const Policy &policy, const Params &p,
                                 const SimConfig &cfg, Rng rng)
    : policy_(policy), params_(p), cfg_(cfg), rng_(rng) {
    validate_config(policy, p, cfg);
    state_ = empty_state(p);
    tails_.assign(static_cast<std::size_t>(p.buffer_levels) + 1, 0);
    tails_[0] = p.n_servers;
    batches_ = make_batches(p, cfg);
    batch_len_ = (cfg.horizon - cfg.warmup) / static_cast<double>(cfg.batches);
    kbar_ = default_kbar(cfg, p);
    inv_n_ = 1.0 / static_cast<double>(p.n_servers);
    h_shift_ = 1.0 + kbar_ * std::log(static_cast<double>(p.n_servers)) /
                         std::pow(static_cast<double>(p.n_servers), 1.0 - p.alpha);
    h_thr_ = h_shift_ * static_cast<double>(p.n_servers);
}

void AggregateEngine::advance_to(double t_end) {
    const double arrival_rate = params_.arrival_rate();
    for (;;) {
        if (!pending_) {
            const double rate = arrival_rate + static_cast<double>(tails_[1]);
            const double dt = cfg_.holding == HoldingTimes::Exponential
                                  ? rng_.exponential(rate)
                                  : 1.0 / rate;
            pending_time_ = now_ + dt;
            pending_ = true;
        }
        if (pending_time_ > t_end) {
            accumulate(now_, t_end);
            now_ = t_end;
            return;
        }
        accumulate(now_, pending_time_);
        now_ = pending_time_;
        pending_ = false;
        ++events_;
        const double total_rate = arrival_rate + static_cast<double>(tails_[1]);
        const double x = rng_.uniform01() * total_rate;
        if (x < arrival_rate) {
            ++arrivals_;
            apply_arrival(x / arrival_rate);
        } else {
            ++departures_;
            apply_departure(x - arrival_rate);
        }
    }
}

void AggregateEngine::accumulate(double from, double to) {
    accumulate_interval(params_, cfg_, batch_len_, batches_, tails_, jobs_, h_shift_,
                        h_thr_, inv_n_, from, to);
}

void AggregateEngine::apply_arrival(double u) {
    const std::int64_t b = params_.buffer_levels;
    std::int64_t join = -1; // occupancy of the chosen server; -1 = blocked

    switch (policy_.kind) {
    case PolicyKind::Jsq:
        join = min_level_ < b ? min_level_ : -1;
        break;
    case PolicyKind::IdleOneFirst:
        if (state_.counts[0] > 0) join = 0;
        else if (b >= 2 && state_.counts[1] > 0) join = 1;
        else {
            const auto srv_level = [&] { // uniform over all servers
                double x = u * static_cast<double>(params_.n_servers);
                double cum = 0.0;
                for (std::int64_t i = 0; i <= b; ++i) {
                    cum += static_cast<double>(state_.counts[static_cast<std::size_t>(i)]);
                    if (x < cum) return i;
                }
                return b;
            }();
            join = srv_level < b ? srv_level : -1;
        }
        break;
    case PolicyKind::JoinIdleQueue:
    case PolicyKind::Random: {
        if (policy_.kind == PolicyKind::JoinIdleQueue && state_.counts[0] > 0) {
            join = 0;
            break;
        }
        double x = u * static_cast<double>(params_.n_servers);
        double cum = 0.0;
        std::int64_t level = b;
        for (std::int64_t i = 0; i <= b; ++i) {
            cum += static_cast<double>(state_.counts[static_cast<std::size_t>(i)]);
            if (x < cum) {
                level = i;
                break;
            }
        }
        join = level < b ? level : -1;
        break;
    }
    default: { // PowerOfD and Custom route through the A_i closed forms
        const JoinDistribution jd = join_distribution(policy_, state_, params_);
        double cum = 0.0;
        join = -1;
        for (std::int64_t i = 0; i < b; ++i) {
            cum += jd.p_join[static_cast<std::size_t>(i)];
            if (u < cum) {
                join = i;
                break;
            }
        }
        break;
    }
    }

    const bool measured = now_ > cfg_.warmup;
    BatchTotals *bt = nullptr;
    if (measured) {
        bt = &batches_[batch_index(cfg_, batch_len_, now_)];
        ++bt->arrivals;
    }
    if (join < 0) {
        if (measured) {
            ++bt->blocked;
            ++bt->joined_busy;
            if (b >= 2) ++bt->routed_two_plus;
        }
        return;
    }
    if (measured) {
        ++bt->wait_count;
        bt->wait_sum += static_cast<double>(join);
        if (join >= 1) {
            ++bt->joined_busy;
            ++bt->waited_count;
            bt->waited_sum += static_cast<double>(join);
            if (join >= 2) ++bt->routed_two_plus;
        }
    }
    state_.counts[static_cast<std::size_t>(join)] -= 1;
    state_.counts[static_cast<std::size_t>(join + 1)] += 1;
    tails_[static_cast<std::size_t>(join + 1)] += 1;
    ++jobs_;
    if (join == min_level_ && state_.counts[static_cast<std::size_t>(join)] == 0)
        min_level_ = join + 1;
}

void AggregateEngine::apply_departure(double x) {
    const std::int64_t b = params_.buffer_levels;
    double cum = 0.0;
    std::int64_t level = b;
    for (std::int64_t i = 1; i <= b; ++i) {
        cum += static_cast<double>(state_.counts[static_cast<std::size_t>(i)]);
        if (x < cum) {
            level = i;
            break;
        }
    }
    state_.counts[static_cast<std::size_t>(level)] -= 1;
    state_.counts[static_cast<std::size_t>(level - 1)] += 1;
    tails_[static_cast<std::size_t>(level)] -= 1;
    --jobs_;
    if (level - 1 < min_level_) min_level_ = level - 1;
}

MetricsEstimate AggregateEngine::finish(double wall_seconds) const {
    return pool_metrics(params_, cfg_, kbar_, batches_, events_, arrivals_, departures_,
                        now_ - cfg_.warmup, wall_seconds);
}

namespace {

// Operational per-server model: real queues, realized waiting times. Used
// to validate the histogram reduction; O(N) per event, meant for small N.
class PerServerEngine {
public:
    PerServerEngine(const Policy &policy, const Params &p, const SimConfig &cfg, Rng rng)
        : policy_(policy), params_(p), cfg_(cfg), rng_(rng) {
        if (policy.kind == PolicyKind::Custom)
            throw std::invalid_argument("per-server mode needs a built-in policy");
        queue_len_.assign(static_cast<std::size_t>(p.n_servers), 0);
        waiting_since_.assign(static_cast<std::size_t>(p.n_servers), {});
        counts_.assign(static_cast<std::size_t>(p.buffer_levels) + 1, 0);
        counts_[0] = p.n_servers;
        batches_ = make_batches(p, cfg);
        batch_len_ = (cfg.horizon - cfg.warmup) / static_cast<double>(cfg.batches);
        kbar_ = default_kbar(cfg, p);
        inv_n_ = 1.0 / static_cast<double>(p.n_servers);
        h_shift_ = 1.0 + kbar_ * std::log(static_cast<double>(p.n_servers)) /
                             std::pow(static_cast<double>(p.n_servers), 1.0 - p.alpha);
        h_thr_ = h_shift_ * static_cast<double>(p.n_servers);
    }

    void run() {
        const double arrival_rate = params_.arrival_rate();
        while (true) {
            const double busy = static_cast<double>(params_.n_servers - counts_[0]);
            const double rate = arrival_rate + busy;
            const double dt = cfg_.holding == HoldingTimes::Exponential
                                  ? rng_.exponential(rate)
                                  : 1.0 / rate;
            const double t_next = now_ + dt;
            if (t_next > cfg_.horizon) {
                accumulate(now_, cfg_.horizon);
                now_ = cfg_.horizon;
                return;
            }
            accumulate(now_, t_next);
            now_ = t_next;
            ++events_;
            const double x = rng_.uniform01() * rate;
            if (x < arrival_rate) {
                ++arrivals_;
                arrive(x / arrival_rate);
            } else {
                ++departures_;
                depart(x - arrival_rate);
            }
        }
    }

    MetricsEstimate finish(double wall_seconds) const {
        return pool_metrics(params_, cfg_, kbar_, batches_, events_, arrivals_,
                            departures_, now_ - cfg_.warmup, wall_seconds);
    }

private:
    void accumulate(double from, double to) {
        // counts_ holds the histogram; tails derived on the fly.
        std::vector<std::int64_t> tails(counts_.size(), 0);
        std::int64_t tail = 0;
        for (std::int64_t i = params_.buffer_levels; i >= 1; --i) {
            tail += counts_[static_cast<std::size_t>(i)];
            tails[static_cast<std::size_t>(i)] = tail;
        }
        tails[0] = params_.n_servers;
        accumulate_interval(params_, cfg_, batch_len_, batches_, tails, jobs_, h_shift_,
                            h_thr_, inv_n_, from, to);
    }

    // k-th (0-based) server at exactly `level` jobs, by scan.
    std::int64_t nth_at_level(std::int64_t level, std::int64_t k) const {
        for (std::size_t j = 0; j < queue_len_.size(); ++j) {
            if (queue_len_[j] == level) {
                if (k == 0) return static_cast<std::int64_t>(j);
                --k;
            }
        }
        throw std::logic_error("per-server: histogram out of sync");
    }

    std::int64_t choose_server(double u) {
        const std::int64_t n = params_.n_servers;
        const std::int64_t b = params_.buffer_levels;
        switch (policy_.kind) {
        case PolicyKind::Jsq: {
            std::int64_t m = 0;
            while (counts_[static_cast<std::size_t>(m)] == 0) ++m;
            const auto k = static_cast<std::int64_t>(
                u * static_cast<double>(counts_[static_cast<std::size_t>(m)]));
            return nth_at_level(m, std::min(k, counts_[static_cast<std::size_t>(m)] - 1));
        }
        case PolicyKind::IdleOneFirst:
            if (counts_[0] > 0) {
                const auto k = static_cast<std::int64_t>(u * static_cast<double>(counts_[0]));
                return nth_at_level(0, std::min(k, counts_[0] - 1));
            }
            if (b >= 2 && counts_[1] > 0) {
                const auto k = static_cast<std::int64_t>(u * static_cast<double>(counts_[1]));
                return nth_at_level(1, std::min(k, counts_[1] - 1));
            }
            return std::min(static_cast<std::int64_t>(u * static_cast<double>(n)), n - 1);
        case PolicyKind::JoinIdleQueue:
            if (counts_[0] > 0) {
                const auto k = static_cast<std::int64_t>(u * static_cast<double>(counts_[0]));
                return nth_at_level(0, std::min(k, counts_[0] - 1));
            }
            return std::min(static_cast<std::int64_t>(u * static_cast<double>(n)), n - 1);
        case PolicyKind::Random:
            return std::min(static_cast<std::int64_t>(u * static_cast<double>(n)), n - 1);
        case PolicyKind::PowerOfD: {
            sample_.clear();
            if (policy_.sampling == Sampling::WithReplacement) {
                for (std::int64_t i = 0; i < policy_.d; ++i)
                    sample_.push_back(static_cast<std::int64_t>(
                        rng_.uniform_below(static_cast<std::uint64_t>(n))));
            } else {
                if (policy_.d > n)
                    throw std::invalid_argument("per-server: d > N without replacement");
                while (static_cast<std::int64_t>(sample_.size()) < policy_.d) {
                    const auto cand = static_cast<std::int64_t>(
                        rng_.uniform_below(static_cast<std::uint64_t>(n)));
                    if (std::find(sample_.begin(), sample_.end(), cand) == sample_.end())
                        sample_.push_back(cand);
                }
            }
            std::int64_t best_len = queue_len_[static_cast<std::size_t>(sample_[0])];
            for (auto s : sample_)
                best_len = std::min(best_len, queue_len_[static_cast<std::size_t>(s)]);
            tied_.clear();
            for (auto s : sample_)
                if (queue_len_[static_cast<std::size_t>(s)] == best_len) tied_.push_back(s);
            if (tied_.size() == 1) return tied_[0];
            return tied_[rng_.uniform_below(tied_.size())];
        }
        default:
            throw std::logic_error("per-server: unsupported policy");
        }
    }

    void arrive(double u) {
        const std::int64_t b = params_.buffer_levels;
        const std::int64_t srv = choose_server(u);
        const std::int64_t len = queue_len_[static_cast<std::size_t>(srv)];
        const bool measured = now_ > cfg_.warmup;
        BatchTotals *bt = measured ? &batches_[batch_index(cfg_, batch_len_, now_)] : nullptr;
        if (measured) ++bt->arrivals;
        if (len == b) { // full buffer, job dropped
            if (measured) {
                ++bt->blocked;
                ++bt->joined_busy;
                if (b >= 2) ++bt->routed_two_plus;
            }
            return;
        }
        if (measured && len >= 1) {
            ++bt->joined_busy;
            if (len >= 2) ++bt->routed_two_plus;
        }
        if (len == 0) {
            if (measured) ++bt->wait_count; // starts service immediately, zero wait
        } else {
            waiting_since_[static_cast<std::size_t>(srv)].push_back(now_);
        }
        counts_[static_cast<std::size_t>(len)] -= 1;
        counts_[static_cast<std::size_t>(len + 1)] += 1;
        queue_len_[static_cast<std::size_t>(srv)] += 1;
        ++jobs_;
    }

    void depart(double x) {
        // x is uniform over [0, busy); map to the x-th busy server.
        auto k = static_cast<std::int64_t>(x);
        std::int64_t srv = -1;
        for (std::size_t j = 0; j < queue_len_.size(); ++j) {
            if (queue_len_[j] > 0) {
                if (k == 0) {
                    srv = static_cast<std::int64_t>(j);
                    break;
                }
                --k;
            }
        }
        if (srv < 0) throw std::logic_error("per-server: departure with no busy server");
        const std::int64_t len = queue_len_[static_cast<std::size_t>(srv)];
        counts_[static_cast<std::size_t>(len)] -= 1;
        counts_[static_cast<std::size_t>(len - 1)] += 1;
        queue_len_[static_cast<std::size_t>(srv)] -= 1;
        --jobs_;
        auto &fifo = waiting_since_[static_cast<std::size_t>(srv)];
        if (!fifo.empty()) { // head job enters service now
            const double arrived_at = fifo.front();
            fifo.pop_front();
            if (arrived_at > cfg_.warmup) {
                BatchTotals &bt = batches_[batch_index(cfg_, batch_len_, arrived_at)];
                const double wait = now_ - arrived_at;
                ++bt.wait_count;
                bt.wait_sum += wait;
                ++bt.waited_count;
                bt.waited_sum += wait;
            }
        }
    }

    Policy policy_;
    Params params_;
    SimConfig cfg_;
    Rng rng_;
    std::vector<std::int64_t> queue_len_;
    std::vector<std::deque<double>> waiting_since_;
    std::vector<std::int64_t> counts_;
    std::int64_t jobs_ = 0;
    double now_ = 0.0;
    std::int64_t events_ = 0, arrivals_ = 0, departures_ = 0;
    std::vector<BatchTotals> batches_;
    double batch_len_ = 0.0;
    double kbar_ = 0.0, h_shift_ = 0.0, h_thr_ = 0.0, inv_n_ = 0.0;
    std::vector<std::int64_t> sample_, tied_;
};

struct ReplicaOutput {
    std::vector<BatchTotals> batches;
    std::int64_t events = 0, arrivals = 0, departures = 0;
};

ReplicaOutput run_replica(const Policy &policy, const Params &p, const SimConfig &cfg,
                          std::int64_t replica) {
    ReplicaOutput out;
    const auto purpose = static_cast<std::uint64_t>(cfg.mode);
    Rng rng(cfg.seed, cfg.point_index, static_cast<std::uint64_t>(replica), purpose);
    if (cfg.mode == SimMode::Aggregate) {
        AggregateEngine eng(policy, p, cfg, rng);
        eng.advance_to(cfg.horizon);
        out.batches = eng.batches();
        out.events = eng.events();
        out.arrivals = eng.arrivals();
        out.departures = eng.departures();
    } else {
        PerServerEngine eng(policy, p, cfg, rng);
        eng.run();
        MetricsEstimate m = eng.finish(0.0);
        out.batches = std::move(m.batches);
        out.events = m.events;
        out.arrivals = m.arrivals;
        out.departures = m.departures;
    }
    return out;
}

} // namespace

MetricsEstimate simulate(const Policy &policy, const Params &p, const SimConfig &cfg) {
    validate_config(policy, p, cfg);
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<ReplicaOutput> outputs(static_cast<std::size_t>(cfg.replicas));
    if (cfg.workers > 1 && cfg.replicas > 1) {
        std::atomic<std::int64_t> next{0};
        const auto n_threads = static_cast<std::size_t>(
            std::min<std::int64_t>(cfg.workers, cfg.replicas));
        std::vector<std::thread> pool;
        std::exception_ptr first_error;
        std::mutex err_mutex;
        for (std::size_t w = 0; w < n_threads; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const std::int64_t i = next.fetch_add(1);
                    if (i >= cfg.replicas) return;
                    try {
                        outputs[static_cast<std::size_t>(i)] = run_replica(policy, p, cfg, i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(err_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        for (auto &t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    } else {
        for (std::int64_t i = 0; i < cfg.replicas; ++i)
            outputs[static_cast<std::size_t>(i)] = run_replica(policy, p, cfg, i);
    }

    std::vector<BatchTotals> batches;
    batches.reserve(static_cast<std::size_t>(cfg.replicas * cfg.batches));
    std::int64_t events = 0, arrivals = 0, departures = 0;
    for (auto &o : outputs) {
        for (auto &b : o.batches) batches.push_back(std::move(b));
        events += o.events;
        arrivals += o.arrivals;
        departures += o.departures;
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double wall = std::chrono::duration<double>(t1 - t0).count();
    return pool_metrics(p, cfg, default_kbar(cfg, p), std::move(batches), events, arrivals,
                        departures,
                        static_cast<double>(cfg.replicas) * (cfg.horizon - cfg.warmup),
                        wall);
}

std::vector<SweepResult> simulate_sweep(const std::vector<SweepPoint> &points,
                                        std::int64_t workers) {
    if (points.empty()) throw std::invalid_argument("simulate_sweep: no points");
    std::vector<SweepResult> results(points.size());
    auto run_one = [&](std::size_t i) {
        SweepPoint pt = points[i];
        pt.cfg.point_index = static_cast<std::uint64_t>(i);
        try {
            results[i].metrics = simulate(pt.policy, pt.params, pt.cfg);
        } catch (const std::exception &e) {
            results[i].error = e.what();
        }
    };
    if (workers > 1 && points.size() > 1) {
        std::atomic<std::size_t> next{0};
        const auto n_threads =
            std::min<std::size_t>(static_cast<std::size_t>(workers), points.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_threads; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= points.size()) return;
                    run_one(i);
                }
            });
        for (auto &t : pool) t.join();
    } else {
        for (std::size_t i = 0; i < points.size(); ++i) run_one(i);
    }
    return results;
}

CrossCheckReport cross_check_modes(const Policy &policy, const Params &p,
                                   const SimConfig &cfg) {
    SimConfig agg = cfg;
    agg.mode = SimMode::Aggregate;
    SimConfig per = cfg;
    per.mode = SimMode::PerServer;
    const MetricsEstimate a = simulate(policy, p, agg);
    const MetricsEstimate s = simulate(policy, p, per);

    CrossCheckReport rep;
    auto add = [&rep](const std::string &name, const Estimate &x, const Estimate &y) {
        ModeComparison c;
        c.metric = name;
        c.aggregate = x;
        c.per_server = y;
        const double denom = std::sqrt(x.se * x.se + y.se * y.se);
        c.z = denom > 0.0 ? (x.value - y.value) / denom
                          : (x.value == y.value ? 0.0 : std::numeric_limits<double>::infinity());
        if (std::abs(c.z) > 4.0) rep.agree = false;
        rep.rows.push_back(std::move(c));
    };
    for (std::size_t i = 0; i < a.es.size(); ++i)
        add("ES" + std::to_string(i + 1), a.es[i], s.es[i]);
    add("p_wait", a.p_wait, s.p_wait);
    add("p_block", a.p_block, s.p_block);
    add("EW", a.ew, s.ew);
    return rep;
}

} // namespace lbq
