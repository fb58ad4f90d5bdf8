#pragma once

#include <stdexcept>
#include <string>

namespace gmg {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape mismatch, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A configuration cannot produce a valid model (indivisible dims, bad widths).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A tensor or loss became NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Data is well-formed but violates a value constraint (range, emptiness).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class HeaderError : public IoError {
 public:
  using IoError::IoError;
};

class TruncationError : public IoError {
 public:
  using IoError::IoError;
};

class DtypeError : public IoError {
 public:
  using IoError::IoError;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace detail
}  // namespace gmg
