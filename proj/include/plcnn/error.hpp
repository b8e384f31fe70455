#pragma once

#include <stdexcept>
#include <string>

namespace plcnn {

/// Shape, topology or option values that cannot describe a valid computation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad caller-supplied data (labels, fold indices, fractions, empty sets).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem, decoding and encoding failures.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when training produces a non-finite loss.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Batch statistics undefined (one value per channel).
class DegenerateStatisticsError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

} // namespace plcnn
