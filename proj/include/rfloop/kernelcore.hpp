#pragma once

#include <string>

#include "rfloop/ensemble.hpp"
#include "rfloop/types.hpp"

namespace rfloop {

/// Controls the eigenvalue stabilization of (M + gamma I)^{-1}.
struct JitterPolicy {
  double initial = 1e-10;
  /// Jitter engages when min shifted eigenvalue <= floor_ratio * max shifted eigenvalue.
  double floor_ratio = 1e-14;
  double symmetry_tol = 1e-12;
};

template <typename Scalar>
struct StabilizedInverse {
  MatrixX<Scalar> inverse;
  MatrixX<Scalar> eigenvectors;
  VectorX<Scalar> eigenvalues;  // of M, ascending, negative values clipped to 0
  Scalar jitter = 0;

  bool jittered() const { return jitter > 0; }
};

/// (M + gamma I)^{-1} by symmetric eigendecomposition. Eigenvalues below zero
/// are clipped; if gamma leaves the spectrum too close to singular, a jitter
/// starting at `policy.initial` is added and doubled until it clears the floor.
/// The returned inverse is exactly symmetric.
template <typename Derived>
StabilizedInverse<typename Derived::Scalar> stabilized_inverse(const Eigen::MatrixBase<Derived>& m,
                                                               typename Derived::Scalar gamma,
                                                               const JitterPolicy& policy = {}) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(m, Scalar(policy.symmetry_tol), "stabilized_inverse");
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw ContractError("stabilized_inverse: gamma must be finite and >= 0");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(m.derived());
  if (solver.info() != Eigen::Success) throw NumericError("stabilized_inverse: eigendecomposition failed");

  StabilizedInverse<Scalar> out;
  out.eigenvalues = solver.eigenvalues().cwiseMax(Scalar(0));
  out.eigenvectors = solver.eigenvectors();
  const VectorX<Scalar> shifted = out.eigenvalues.array() + gamma;
  const Scalar lo = shifted.size() ? shifted.minCoeff() : Scalar(1);
  const Scalar hi = shifted.size() ? shifted.maxCoeff() : Scalar(1);
  const Scalar ratio(policy.floor_ratio);
  if (lo <= ratio * hi) {
    out.jitter = Scalar(policy.initial);
    while (lo + out.jitter <= ratio * (hi + out.jitter)) out.jitter *= 2;
  }
  const VectorX<Scalar> root = (shifted.array() + out.jitter).rsqrt();
  const MatrixX<Scalar> factor = out.eigenvectors * root.asDiagonal();
  out.inverse = gram(factor, Scalar(1));
  return out;
}

/// Kernels of one realization under the 1/n convention: K = Phi Phi^T / n on
/// the training set and k_cross(:, t) = Phi phi(x_t) / n for test point t.
template <typename Scalar>
struct KernelBundle {
  MatrixX<Scalar> K;
  MatrixX<Scalar> k_cross;  // N x M, possibly empty
  Scalar gamma = 0;         // N lambda / n

  Index num_train() const { return K.rows(); }
  Index num_test() const { return k_cross.cols(); }
};

/// Kernel-level regularization gamma: N lambda / n.
inline double kernel_gamma(double lambda, Index num_train, Index width) {
  return static_cast<double>(num_train) * lambda / static_cast<double>(width);
}

/// Primal ridge parameter that realizes a given gamma at width n.
inline double primal_lambda(double gamma, Index num_train, Index width) {
  return gamma * static_cast<double>(width) / static_cast<double>(num_train);
}

template <typename Scalar>
KernelBundle<Scalar> make_kernel_bundle(const FeatureMatrix<Scalar>& train, const FeatureMatrix<Scalar>& test,
                                        Scalar gamma) {
  detail::require_shape(train.width() == test.width(), "make_kernel_bundle: train/test feature widths differ");
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw ContractError("make_kernel_bundle: gamma must be finite and >= 0");
  const Scalar n = static_cast<Scalar>(train.width());
  KernelBundle<Scalar> b;
  b.K = gram(train.values, n);
  b.k_cross = (train.values * test.values.transpose()) / n;
  b.gamma = gamma;
  return b;
}

template <typename Scalar>
KernelBundle<Scalar> make_kernel_bundle(const FeatureMatrix<Scalar>& train, Scalar gamma) {
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw ContractError("make_kernel_bundle: gamma must be finite and >= 0");
  KernelBundle<Scalar> b;
  b.K = gram(train.values, static_cast<Scalar>(train.width()));
  b.k_cross.resize(b.K.rows(), 0);
  b.gamma = gamma;
  return b;
}

namespace detail {

template <typename Scalar, typename Derived>
void require_targets(const KernelBundle<Scalar>& b, const Eigen::MatrixBase<Derived>& y, const char* op) {
  require_shape(y.size() == b.num_train(), std::string(op) + ": target length " + std::to_string(y.size()) +
                                               " != training set size " + std::to_string(b.num_train()));
}

}  // namespace detail

/// k_cross^T (K + gamma I)^{-1} y.
template <typename Scalar, typename Derived>
VectorX<Scalar> ridge_predict(const KernelBundle<Scalar>& b, const Eigen::MatrixBase<Derived>& y) {
  detail::require_targets(b, y, "ridge_predict");
  const auto inv = stabilized_inverse(b.K, b.gamma);
  return b.k_cross.transpose() * (inv.inverse * y);
}

/// (1/N) ||Phi w* - y||^2 evaluated through the ridge weights w* = Phi^T (K + gamma I)^{-1} y / n.
template <typename Scalar, typename Derived>
Scalar train_error_direct(const KernelBundle<Scalar>& b, const FeatureMatrix<Scalar>& features,
                          const Eigen::MatrixBase<Derived>& y) {
  detail::require_targets(b, y, "train_error_direct");
  detail::require_shape(features.num_points() == b.num_train(), "train_error_direct: feature rows != N");
  const auto inv = stabilized_inverse(b.K, b.gamma);
  const VectorX<Scalar> w =
      features.values.transpose() * (inv.inverse * y) / static_cast<Scalar>(features.width());
  const VectorX<Scalar> residual = features.values * w - y;
  return residual.squaredNorm() / static_cast<Scalar>(y.size());
}

/// (gamma^2 / N) y^T (K + gamma I)^{-2} y.
template <typename Scalar, typename Derived>
Scalar train_error_resolvent(const KernelBundle<Scalar>& b, const Eigen::MatrixBase<Derived>& y) {
  detail::require_targets(b, y, "train_error_resolvent");
  const auto inv = stabilized_inverse(b.K, b.gamma);
  const VectorX<Scalar> v = inv.inverse * y;
  return b.gamma * b.gamma * v.squaredNorm() / static_cast<Scalar>(y.size());
}

/// Mean squared error of the ridge predictor over the test points.
template <typename Scalar, typename DerivedY, typename DerivedT>
Scalar test_error_direct(const KernelBundle<Scalar>& b, const Eigen::MatrixBase<DerivedY>& y,
                         const Eigen::MatrixBase<DerivedT>& y_test) {
  detail::require_targets(b, y, "test_error_direct");
  detail::require_shape(y_test.size() == b.num_test() && b.num_test() > 0,
                        "test_error_direct: test target length != number of test columns");
  const VectorX<Scalar> pred = ridge_predict(b, y);
  return (pred - y_test).squaredNorm() / static_cast<Scalar>(y_test.size());
}

/// Test-measure averages C = <k k^T>, b = <y k>, c = <y^2>.
template <typename Scalar>
struct PopulationOperators {
  MatrixX<Scalar> C;
  VectorX<Scalar> b;
  Scalar c = 0;
};

template <typename DerivedK, typename DerivedT>
PopulationOperators<typename DerivedK::Scalar> population_operators(const Eigen::MatrixBase<DerivedK>& k_cross,
                                                                    const Eigen::MatrixBase<DerivedT>& y_test) {
  using Scalar = typename DerivedK::Scalar;
  detail::require_shape(k_cross.cols() == y_test.size() && y_test.size() > 0,
                        "population_operators: test target length != number of test columns");
  const Scalar m = static_cast<Scalar>(y_test.size());
  PopulationOperators<Scalar> ops;
  ops.C = gram(k_cross, m);
  ops.b = k_cross * y_test / m;
  ops.c = y_test.squaredNorm() / m;
  return ops;
}

/// y^T G C G y - 2 b^T G y + c for a given resolvent G.
template <typename Scalar, typename DerivedG, typename DerivedY>
Scalar test_error_quadratic(const Eigen::MatrixBase<DerivedG>& resolvent, const PopulationOperators<Scalar>& ops,
                            const Eigen::MatrixBase<DerivedY>& y) {
  detail::require_shape(resolvent.rows() == y.size() && ops.C.rows() == y.size() && ops.b.size() == y.size(),
                        "test_error_quadratic: dimension mismatch");
  const VectorX<Scalar> u = resolvent * y;
  return u.dot(ops.C * u) - Scalar(2) * ops.b.dot(u) + ops.c;
}

template <typename Scalar>
struct Observables {
  Scalar train_error = 0;
  Scalar test_error = 0;
  Scalar gap = 0;
};

/// Training error, test error and gap of one realization from a single
/// stabilized inverse.
template <typename Scalar, typename DerivedY, typename DerivedT>
Observables<Scalar> evaluate_observables(const KernelBundle<Scalar>& b, const Eigen::MatrixBase<DerivedY>& y,
                                         const Eigen::MatrixBase<DerivedT>& y_test) {
  detail::require_targets(b, y, "evaluate_observables");
  detail::require_shape(y_test.size() == b.num_test() && b.num_test() > 0,
                        "evaluate_observables: test target length != number of test columns");
  const auto inv = stabilized_inverse(b.K, b.gamma);
  const VectorX<Scalar> alpha = inv.inverse * y;
  Observables<Scalar> obs;
  obs.train_error = b.gamma * b.gamma * alpha.squaredNorm() / static_cast<Scalar>(y.size());
  obs.test_error = (b.k_cross.transpose() * alpha - y_test).squaredNorm() / static_cast<Scalar>(y_test.size());
  obs.gap = obs.test_error - obs.train_error;
  return obs;
}

}  // namespace rfloop

namespace rfloop {

/// Features of one network on train and test points from a single forward
/// pass over the stacked inputs.
template <typename Scalar, typename DerivedTrain, typename DerivedTest>
KernelBundle<Scalar> realization_bundle(const NetworkParams<Scalar>& params,
                                        const Eigen::MatrixBase<DerivedTrain>& x_train,
                                        const Eigen::MatrixBase<DerivedTest>& x_test, Scalar gamma) {
  detail::require_shape(x_train.cols() == x_test.cols(), "realization_bundle: train/test input dimensions differ");
  MatrixX<Scalar> stacked(x_train.rows() + x_test.rows(), x_train.cols());
  stacked.topRows(x_train.rows()) = x_train.template cast<Scalar>();
  stacked.bottomRows(x_test.rows()) = x_test.template cast<Scalar>();
  const FeatureMatrix<Scalar> phi = forward_features(params, stacked);
  const Scalar n = static_cast<Scalar>(phi.width());
  const auto train = phi.values.topRows(x_train.rows());
  KernelBundle<Scalar> b;
  b.K = gram(train, n);
  b.k_cross = (train * phi.values.bottomRows(x_test.rows()).transpose()) / n;
  b.gamma = gamma;
  return b;
}

}  // namespace rfloop
