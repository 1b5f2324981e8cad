#pragma once

#include <stdexcept>
#include <string>

namespace derivscope {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (bad sizes, fractions, grammar files).
/// The CLI maps these to the usage exit status.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data: alignment, decoding, schema and
/// lookup failures. The CLI maps these to the data exit status.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A statistic that is mathematically undefined on the given input
/// (zero variance, single class, zero-length sentence).
class UndefinedStatistic : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace derivscope
