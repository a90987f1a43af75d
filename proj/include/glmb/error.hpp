#pragma once

#include <stdexcept>
#include <string>

namespace glmb {

/// Malformed arguments: ragged or NaN cost matrices, zero counts, dimension mismatches.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A density whose weights are all zero (or -inf in log domain).
class DegenerateDensityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular covariance or similar linear-algebra breakdown.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Probability parameters at 0 or 1 give infinite log-odds costs.
class InfiniteCostError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace glmb
