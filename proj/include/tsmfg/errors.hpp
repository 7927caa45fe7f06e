#pragma once

#include <stdexcept>
#include <string>

namespace tsmfg {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The numeric minimizer hit alpha_cap while the objective was still
// decreasing, so the true minimizer lies outside the bracket.
class BracketError : public Error {
 public:
  using Error::Error;
};

// A backward integration left the a-priori max-principle envelope.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

// Fixed-point iteration ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual, int iterations)
      : Error(what), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const noexcept { return last_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

// Objects built for different models were combined.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsmfg
