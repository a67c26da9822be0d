#pragma once

#include <stdexcept>
#include <string>

namespace lowrank {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or out-of-contract input (shape mismatch, non-finite entries, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value (empty dimension list, zero std, ...).
class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel failed to converge; carries the last residual.
class NumericalFailureError : public Error {
 public:
  NumericalFailureError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Spectrum unusable for the requested quantity (all-zero singular values, ...).
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

/// Training or an update rule hit non-finite values; carries the step index.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, long step)
      : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Text input could not be parsed; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Operation not available for this input (missing ground truth, size cap, ...).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace lowrank
