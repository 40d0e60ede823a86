#pragma once

#include <stdexcept>
#include <string>

namespace rfloop {

/// Operand shapes disagree (row/column counts, vector lengths).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An input violates a documented precondition (symmetry, positivity, sizes).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or received NaN/Inf.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Explicit vertex tensors would exceed the configured memory budget.
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail
}  // namespace rfloop
