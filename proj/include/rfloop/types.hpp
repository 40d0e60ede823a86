#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "rfloop/errors.hpp"

namespace rfloop {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Largest absolute entry; zero for empty operands.
template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return typename Derived::Scalar(0);
  return m.cwiseAbs().maxCoeff();
}

/// Throws ContractError unless `m` is square and symmetric to `rel_tol`
/// relative to its largest entry.
template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar rel_tol,
                       const std::string& what) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) throw ShapeError(what + ": matrix is not square");
  if (!m.allFinite()) throw NumericError(what + ": non-finite entries");
  const Scalar scale = std::max(max_abs(m), Scalar(1e-300));
  const Scalar asym = max_abs(m - m.transpose());
  if (asym > rel_tol * scale) {
    throw ContractError(what + ": matrix is not symmetric (max |M - M^T| = " + std::to_string(asym) +
                        ")");
  }
}

/// Copies the lower triangle onto the upper one so the result is exactly symmetric.
template <typename Scalar>
void mirror_lower(MatrixX<Scalar>& m) {
  m.template triangularView<Eigen::StrictlyUpper>() = m.transpose();
}

/// (1/scale) * F F^T, filled through a rank update so it is bitwise symmetric.
template <typename Derived>
MatrixX<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& features,
                                       typename Derived::Scalar scale) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(features.rows(), features.rows());
  out.template selfadjointView<Eigen::Lower>().rankUpdate(features.derived(), Scalar(1) / scale);
  mirror_lower(out);
  return out;
}

}  // namespace rfloop
