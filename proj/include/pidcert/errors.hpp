#pragma once

#include <stdexcept>
#include <string>

namespace pidcert {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched or non-square operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Iterative method failed to converge, or a non-finite value appeared.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Caller passed arguments that are invalid for the requested operation.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// An operation's documented precondition does not hold (e.g. gains outside
/// the admissible set).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A certificate step (positivity, ordering, margin) failed.
class CertificateError : public Error {
 public:
  CertificateError(std::string step, const std::string& what)
      : Error(step + ": " + what), step_(std::move(step)) {}
  const std::string& step() const noexcept { return step_; }

 private:
  std::string step_;
};

/// Plant evaluation produced NaN/Inf.
class PlantError : public Error {
 public:
  using Error::Error;
};

/// ODE integration failed (step-size underflow, non-finite state).
class IntegrationError : public Error {
 public:
  IntegrationError(double time, const std::string& what)
      : Error(what + " at t=" + std::to_string(time)), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// An internal consistency check failed. Indicates a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace pidcert
