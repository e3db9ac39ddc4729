#pragma once

#include <string>
#include <vector>

#include "cmtn/tensor.hpp"

namespace cmtn {

enum class DomainTag { Source = 0, Target = 1 };

inline int domain_label(DomainTag d) { return d == DomainTag::Source ? 0 : 1; }

// One windowed series. `label` carries the regression target; for
// classification datasets it holds the class (0/1) and `label_class`
// mirrors it as an integer.
struct TimeSeriesSample {
    Tensor x; // [N x M]
    double label = 0.0;
    int label_class = 0;
    DomainTag domain = DomainTag::Source;
};

struct DomainDataset {
    std::vector<TimeSeriesSample> samples;
    DomainTag domain = DomainTag::Source;

    int window() const;  // N; DataError when empty
    int sensors() const; // M
    // Checks uniform N x M, finite values, consistent domain tags.
    void validate() const;
};

// Delimited export: header then one row per time step,
// series_id,step,sensor_1..sensor_M,label,domain. Values are written so
// they parse back bit-identically.
void write_dataset_csv(const std::string& path, const DomainDataset& ds);
DomainDataset read_dataset_csv(const std::string& path);

} // namespace cmtn
