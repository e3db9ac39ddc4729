#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cmtn/tensor.hpp"

namespace cmtn {

// Central-difference slope of a one-variable function at x.
double central_difference(const std::function<double(double)>& f, double x, double eps);

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;   // which element disagreed most, e.g. "W_lstm[17]"
    int checked = 0;
};

// Compares analytic gradients against central differences of a scalar
// function of the parameter set. Relative error per element is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckReport finite_difference_check(
    const std::function<double(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& params,
    const std::vector<Tensor>& analytic,
    double eps,
    const std::vector<std::string>& names = {});

} // namespace cmtn
