#pragma once

#include <optional>
#include <vector>

namespace cmtn {

// (100/n) * sum |(y_i - yhat_i) / y_i|. Any zero truth value is an error
// since the percentage is undefined there.
double mape(const std::vector<double>& truth, const std::vector<double>& pred);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Rank-based (pair-counting) AUC with class 1 as positive:
// P(score+ > score-) + 0.5 * P(tie). Needs both classes.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricReport {
    std::optional<double> mape;     // regression, percent
    std::optional<double> accuracy; // classification, fraction
    std::optional<double> auc;      // classification, fraction
    int n_positive = 0;
    int n_negative = 0;
    int n_total = 0;
};

} // namespace cmtn
