#ifndef LBQ_PARAMS_HPP
#define LBQ_PARAMS_HPP

#include <cstdint>
#include <optional>

namespace lbq {

// System parameters. lambda is the per-server load; total arrival rate is
// lambda * N and every server serves at rate 1. Each server holds at most
// b jobs (1 in service, b-1 buffered).
struct Params {
    std::int64_t n_servers = 1;   // N
    double alpha = 0.5;           // heavy-traffic exponent in lambda = 1 - N^-alpha
    std::int64_t buffer_levels = 1; // b
    double lambda = 0.0;          // per-server load, in (0,1)
    bool lambda_overridden = false;

    double arrival_rate() const { return lambda * static_cast<double>(n_servers); }
};

// Builds Params with lambda = 1 - N^-alpha, or the override when given.
// Throws std::invalid_argument on N < 1, b < 1, alpha outside (0,1]
// (when no override), or a resulting lambda outside (0,1).
Params make_params(std::int64_t n_servers, double alpha, std::int64_t buffer_levels,
                   std::optional<double> lambda_override = std::nullopt);

} // namespace lbq

#endif
