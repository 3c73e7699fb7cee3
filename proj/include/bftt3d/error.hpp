#pragma once

#include <stdexcept>
#include <string>

namespace bftt3d {

// Error families map onto CLI exit codes: ConfigError -> 2, NumericError -> 3,
// everything else -> 1.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

// A persisted artifact parsed correctly but violates a semantic invariant.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace bftt3d
