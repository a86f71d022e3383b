#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchpack {

/// Failures of the numerical method itself (as opposed to bad arguments).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A triangular factorization met a non-positive pivot.
class FactorizationFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// Nystrom core stayed indefinite after every shift retry.
class NystromUnstable : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// An adaptive stopping rule was not met before the multiplication cap.
/// Carries the last approximation that was formed.
template <class Approx>
class TerminationCapReached : public NumericalFailure {
 public:
  TerminationCapReached(const std::string& what, Approx best,
                        std::vector<double> residuals = {})
      : NumericalFailure(what), best_(std::move(best)),
        residuals_(std::move(residuals)) {}

  const Approx& best() const noexcept { return best_; }
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  Approx best_;
  std::vector<double> residuals_;
};

/// Bound parameters outside the range in which the bound was proven.
class BoundInapplicable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file; line() is 1-based, 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")"
                                : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sketchpack
