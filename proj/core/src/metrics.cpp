#include "cmtn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmtn/errors.hpp"

namespace cmtn {

double mape(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size())
        throw MetricError("mape: " + std::to_string(truth.size()) + " truth values vs " +
                          std::to_string(pred.size()) + " predictions");
    if (truth.empty()) throw MetricError("mape: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 0.0)
            throw MetricError("mape: truth value at index " + std::to_string(i) +
                              " is zero; the percentage error is undefined");
        sum += std::fabs((truth[i] - pred[i]) / truth[i]);
    }
    return 100.0 * sum / static_cast<double>(truth.size());
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw MetricError("accuracy: " + std::to_string(pred.size()) + " predictions vs " +
                          std::to_string(truth.size()) + " truth labels");
    if (pred.empty()) throw MetricError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw MetricError("auc: " + std::to_string(scores.size()) + " scores vs " +
                          std::to_string(labels.size()) + " labels");
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw MetricError("auc: label at index " + std::to_string(i) + " is " +
                              std::to_string(labels[i]) + ", expected 0 or 1");
        (labels[i] == 1 ? pos : neg)++;
    }
    if (pos == 0 || neg == 0)
        throw MetricError("auc needs both classes; got " + std::to_string(pos) + " positive and " +
                          std::to_string(neg) + " negative samples");

    // Sort once, then walk tie groups: every positive in a group beats all
    // negatives strictly below and ties the negatives inside the group.
    // Counts are integers, so this equals brute-force pair enumeration.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double wins = 0.0, ties = 0.0;
    std::size_t neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t group_pos = 0, group_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? group_pos : group_neg)++;
            ++j;
        }
        wins += static_cast<double>(group_pos) * static_cast<double>(neg_below);
        ties += static_cast<double>(group_pos) * static_cast<double>(group_neg);
        neg_below += group_neg;
        i = j;
    }
    return (wins + 0.5 * ties) / (static_cast<double>(pos) * static_cast<double>(neg));
}

} // namespace cmtn
