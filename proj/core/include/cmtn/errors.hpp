#pragma once

#include <stdexcept>
#include <string>

namespace cmtn {

// Shape or dimension disagreement between tensors.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument value (bad axis, empty input, non-scalar loss, ...).
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or unknown configuration key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dataset-level problem (missing class, non-monotonic timestamps, ...).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (wrong variant/domain combination, foreign sample, cross-tape tensor).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File system or parse failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Metric preconditions violated (zero reference value, single-class AUC, ...).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An op produced NaN/Inf from finite inputs (raised in checked builds).
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training aborted; message names the offending batch.
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cmtn
