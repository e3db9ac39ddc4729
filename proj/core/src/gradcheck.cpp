#include "cmtn/gradcheck.hpp"

#include <cmath>

namespace cmtn {

double central_difference(const std::function<double(double)>& f, double x, double eps) {
    if (eps <= 0.0) throw ArgumentError("central_difference: eps must be positive");
    return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

GradCheckReport finite_difference_check(
    const std::function<double(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& params,
    const std::vector<Tensor>& analytic,
    double eps,
    const std::vector<std::string>& names) {
    if (params.size() != analytic.size())
        throw ArgumentError("finite_difference_check: " + std::to_string(params.size()) +
                            " parameter tensors but " + std::to_string(analytic.size()) +
                            " gradient tensors");
    if (!names.empty() && names.size() != params.size())
        throw ArgumentError("finite_difference_check: name list does not match parameter list");
    if (eps <= 0.0) throw ArgumentError("finite_difference_check: eps must be positive");

    GradCheckReport report;
    std::vector<Tensor> probe = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].shape() != analytic[p].shape())
            throw ShapeError("finite_difference_check: gradient shape " +
                             shape_string(analytic[p].shape()) + " does not match parameter " +
                             shape_string(params[p].shape()));
        const std::vector<double>& base = params[p].values();
        const std::vector<double>& grad = analytic[p].values();
        for (std::size_t i = 0; i < base.size(); ++i) {
            std::vector<double> bumped = base;
            bumped[i] = base[i] + eps;
            probe[p] = Tensor(params[p].shape(), bumped);
            const double up = f(probe);
            bumped[i] = base[i] - eps;
            probe[p] = Tensor(params[p].shape(), bumped);
            const double down = f(probe);
            probe[p] = params[p];

            const double numeric = (up - down) / (2.0 * eps);
            const double a = grad[i];
            const double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                const std::string label = names.empty() ? ("param" + std::to_string(p)) : names[p];
                report.worst = label + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

} // namespace cmtn
