// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace auglab {

// Base class for everything thrown by the library. The CLI maps subclasses
// to exit codes: ConfigError -> 2, NumericError -> 3, anything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform (matmul/conv extents, non-integral output size).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Bad or missing configuration (files, flags, magnitudes out of range).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data; the message carries the byte offset when known.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf showed up in a forward/backward pass or a loss value.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Weight transfer between models failed; lists the offending names.
class TransferError : public Error {
 public:
  TransferError(const std::string& msg, std::vector<std::string> names)
      : Error(msg), names_(std::move(names)) {}
  const std::vector<std::string>& missing_names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

}  // namespace auglab
