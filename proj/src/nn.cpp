#include "cfdebias/nn.hpp"

#include <algorithm>
#include <cmath>

namespace cfdebias {

FiniteDiffReport finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                                   const Eigen::VectorXd& params, const Eigen::VectorXd& analytic, double h)
{
    if (!(h > 0.0))
        fail(ErrorCode::ConfigError, "finite-difference step must be positive");
    detail::require_shape(params.size() == analytic.size(), "analytic gradient length differs from parameters");

    FiniteDiffReport report;
    Eigen::VectorXd probe = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + h;
        const double up = loss(probe);
        probe[i] = params[i] - h;
        const double down = loss(probe);
        probe[i] = params[i];
        if (!std::isfinite(up) || !std::isfinite(down))
            fail(ErrorCode::NonFiniteLoss, "loss is not finite at parameter " + std::to_string(i));

        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i];
        const double err = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
        if (report.worst_index < 0 || err > report.max_relative_error)
            report = {err, i, a, numeric};
    }
    return report;
}

} // namespace cfdebias
