#ifndef LBQ_STATE_HPP
#define LBQ_STATE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lbq/params.hpp"

namespace lbq {

// Occupancy histogram (n_0, ..., n_b): n_i servers hold exactly i jobs.
// This is the canonical CTMC state; the tail fractions s_i = |{servers
// with >= i jobs}| / N are a bijective reparameterization of it.
struct AggregateState {
    std::vector<std::int64_t> counts; // size b+1, sums to N

    std::int64_t levels() const { return static_cast<std::int64_t>(counts.size()) - 1; }

    // Number of servers with at least `level` jobs. tail_count(0) = N,
    // tail_count(i) = 0 for i > b.
    std::int64_t tail_count(std::int64_t level) const;

    bool operator==(const AggregateState &other) const { return counts == other.counts; }
    bool operator<(const AggregateState &other) const { return counts < other.counts; }
};

// State with all servers idle.
AggregateState empty_state(const Params &p);

// Validates counts >= 0 and sum == N; throws std::invalid_argument otherwise.
void validate_state(const AggregateState &s, const Params &p);

// Tail fractions (s_1, ..., s_b); s_i = tail_count(i)/N.
std::vector<double> tail_fractions(const AggregateState &s, const Params &p);

// s_i for one level; level 0 gives 1, levels > b give 0.
double tail_fraction(const AggregateState &s, const Params &p, std::int64_t level);

// Total jobs per server, sum_{i=1..b} s_i.
double total_per_server(const AggregateState &s, const Params &p);

// Number of states C(N+b, b), clamped to INT64_MAX.
std::int64_t state_space_size(std::int64_t n_servers, std::int64_t buffer_levels);

// Visits every composition of N into b+1 nonnegative parts in lexicographic
// order of the counts vector. Single-threaded, deterministic.
void for_each_state(const Params &p, const std::function<void(const AggregateState &)> &fn);

std::string to_string(const AggregateState &s);

} // namespace lbq

#endif
