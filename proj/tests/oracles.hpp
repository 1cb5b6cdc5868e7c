#ifndef LBQ_TEST_ORACLES_HPP
#define LBQ_TEST_ORACLES_HPP

#include <cstdint>
#include <vector>

// Closed-form oracles, independent of the library code they check.
namespace oracle {

// Erlang loss formula B(N, a) via the standard recurrence
// B_k = a B_{k-1} / (k + a B_{k-1}), B_0 = 1.
inline double erlang_b(std::int64_t servers, double offered_load) {
    double b = 1.0;
    for (std::int64_t k = 1; k <= servers; ++k)
        b = offered_load * b / (static_cast<double>(k) + offered_load * b);
    return b;
}

// N independent M/M/1/1 queues (random routing, single slot): per-server
// blocking probability lambda / (1 + lambda) = B(1, lambda).
inline double mm11_loss(double lambda) { return lambda / (1.0 + lambda); }

// Stationary vector of a birth-death chain from detailed balance;
// birth[i] is the rate i -> i+1, death[i] the rate i+1 -> i.
inline std::vector<double> birth_death_pi(const std::vector<double> &birth,
                                          const std::vector<double> &death) {
    std::vector<double> pi(birth.size() + 1, 1.0);
    for (std::size_t i = 0; i < birth.size(); ++i)
        pi[i + 1] = pi[i] * birth[i] / death[i];
    double total = 0.0;
    for (double x : pi) total += x;
    for (double &x : pi) x /= total;
    return pi;
}

} // namespace oracle

#endif
