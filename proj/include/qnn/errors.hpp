#pragma once

#include <stdexcept>
#include <string>

namespace qnn {

// Error taxonomy shared by the whole library. The CLI maps these onto
// process exit codes (usage -> 1, data -> 2, numeric -> 3).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes do not line up (reports both shapes in the message).
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration value (unknown format name, bad dropout rate, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Invalid argument to an operation (empty batch, non-scalar loss, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// Malformed input data (CSV row, out-of-range index, unknown column).
struct DataError : Error {
    using Error::Error;
};

// Unreadable file container (bad magic, version mismatch).
struct FileFormatError : Error {
    using Error::Error;
};

// File parsed but contents are inconsistent (truncation, shape mismatch).
struct IntegrityError : Error {
    using Error::Error;
};

// Metric is undefined on the given input (single-class AUC).
struct MetricError : Error {
    using Error::Error;
};

// Training produced a non-finite loss or gradient.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace qnn
