#include "lbq/params.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lbq {

Params make_params(std::int64_t n_servers, double alpha, std::int64_t buffer_levels,
                   std::optional<double> lambda_override) {
    if (n_servers < 1) throw std::invalid_argument("make_params: N must be >= 1");
    if (buffer_levels < 1) throw std::invalid_argument("make_params: b must be >= 1");

    Params p;
    p.n_servers = n_servers;
    p.alpha = alpha;
    p.buffer_levels = buffer_levels;

    if (lambda_override) {
        p.lambda = *lambda_override;
        p.lambda_overridden = true;
    } else {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw std::invalid_argument("make_params: alpha must be in (0, 1]");
        p.lambda = 1.0 - std::pow(static_cast<double>(n_servers), -alpha);
    }
    if (!(p.lambda > 0.0 && p.lambda < 1.0))
        throw std::invalid_argument("make_params: lambda = " + std::to_string(p.lambda) +
                                    " is outside (0, 1); N = 1 needs an override");
    return p;
}

} // namespace lbq
