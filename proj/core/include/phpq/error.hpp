#pragma once

#include <stdexcept>
#include <string>

namespace phpq {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array extents do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter or argument is outside its valid range.
class ParamError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a contract (e.g. negative post-ReLU activations).
class InputError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked without the state it depends on (e.g. a backward
/// pass without a forward cache).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value detected during numerical work.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorCode {
  io,
  bad_magic,
  bad_version,
  truncated,
  dim_mismatch,
  negative_value,
  malformed,
};

const char* to_string(FormatErrorCode code) noexcept;

/// Failure while reading or writing one of the binary/text file formats.
class FormatError : public Error {
 public:
  FormatError(FormatErrorCode code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

  FormatErrorCode code() const noexcept { return code_; }

 private:
  FormatErrorCode code_;
};

}  // namespace phpq
