#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace speclab {

/// Base of every error raised by the library. Each subclass maps to one
/// failure category so callers (and the CLI exit-code mapping) can dispatch
/// on type instead of parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Table enumeration would exceed the configured context cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Scalar argument outside its admissible interval.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Context shorter than the model's conditioning order.
class ContextError : public Error {
 public:
  using Error::Error;
};

/// Mismatched sequence or vector lengths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Weights that do not form a probability distribution.
class DistributionError : public Error {
 public:
  using Error::Error;
};

/// Residual max(0, q - p) carries zero mass.
class DegenerateResidualError : public Error {
 public:
  using Error::Error;
};

/// Logit buffer does not fit in the verify unit's SRAM.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Ill-formed experiment input. `path()` names the offending field
/// (e.g. "decode.trials").
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace speclab
