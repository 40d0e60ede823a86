#pragma once

#include "rfloop/fluctuation.hpp"
#include "rfloop/kernelcore.hpp"

namespace rfloop {

/// Eigensystem of the mean kernel, eigenvalues in non-increasing order, with
/// resolvent weights 1/(max(rho_i, 0) + gamma).
template <typename Scalar>
struct SpectralBasis {
  VectorX<Scalar> eigenvalues;
  MatrixX<Scalar> basis;
  VectorX<Scalar> resolvent_weights;
  Scalar gamma = 0;

  Index size() const { return eigenvalues.size(); }
  Scalar rho_min() const { return std::max(Scalar(0), eigenvalues.minCoeff()); }
};

template <typename Derived>
SpectralBasis<typename Derived::Scalar> spectral_decompose(const Eigen::MatrixBase<Derived>& mean_K,
                                                           typename Derived::Scalar gamma) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(mean_K, Scalar(1e-12), "spectral_decompose");
  if (!(gamma > 0) || !std::isfinite(gamma)) throw ContractError("spectral_decompose: gamma must be finite and > 0");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(mean_K.derived());
  if (es.info() != Eigen::Success) throw NumericError("spectral_decompose: eigendecomposition failed");
  SpectralBasis<Scalar> out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.basis = es.eigenvectors().rowwise().reverse();
  out.resolvent_weights = (out.eigenvalues.cwiseMax(Scalar(0)).array() + gamma).inverse();
  out.gamma = gamma;
  return out;
}

/// Vertex rotated into the eigenbasis: V~_(ij)(kl) = sum U_ai U_bj U_ck U_dl V_(ab)(cd).
template <typename Scalar>
struct SpectralVertex {
  VertexTensor<Scalar> values;

  Scalar operator()(Index i, Index j, Index k, Index l) const { return values(i, j, k, l); }
};

namespace detail {

/// Applies U^T (.) U to the (a, b) pair index of every column of a pair matrix.
template <typename Scalar>
MatrixX<Scalar> rotate_pair_rows(const MatrixX<Scalar>& pairs, const MatrixX<Scalar>& U) {
  const Index n = U.rows();
  MatrixX<Scalar> out(pairs.rows(), pairs.cols());
  for (Index col = 0; col < pairs.cols(); ++col) {
    const Eigen::Map<const MatrixX<Scalar>> block(pairs.col(col).data(), n, n);
    Eigen::Map<MatrixX<Scalar>> dst(out.col(col).data(), n, n);
    dst.noalias() = U.transpose() * block * U;
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
SpectralVertex<Scalar> spectral_vertex(const SpectralBasis<Scalar>& basis, const VertexTensor<Scalar>& v) {
  detail::require_shape(v.points == basis.size(), "spectral_vertex: vertex and basis sizes differ");
  const MatrixX<Scalar> rows = detail::rotate_pair_rows(v.pairs, basis.basis);
  const MatrixX<Scalar> both = detail::rotate_pair_rows(MatrixX<Scalar>(rows.transpose()), basis.basis);
  return {VertexTensor<Scalar>{MatrixX<Scalar>(both.transpose()), v.points, v.width_used}};
}

/// (gamma^2/N) sum_i y~_i^2 / (rho_i + gamma)^2.
template <typename Scalar, typename Derived>
Scalar spectral_train_tree(const SpectralBasis<Scalar>& basis, const Eigen::MatrixBase<Derived>& y) {
  detail::require_shape(y.size() == basis.size(), "spectral_train_tree: target length != basis size");
  const VectorX<Scalar> yt = basis.basis.transpose() * y;
  const Scalar sum = (yt.array() * basis.resolvent_weights.array()).square().sum();
  return basis.gamma * basis.gamma * sum / static_cast<Scalar>(y.size());
}

/// (gamma^2/(N n)) sum_{ijk} y~_i y~_j V~_(ik)(kj) [l_i^2 l_j l_k + l_i l_j^2 l_k + l_i l_j l_k^2].
template <typename Scalar, typename Derived>
Scalar spectral_train_oneloop(const SpectralBasis<Scalar>& basis, const SpectralVertex<Scalar>& sv,
                              const Eigen::MatrixBase<Derived>& y) {
  const Index n = basis.size();
  detail::require_shape(y.size() == n && sv.values.points == n, "spectral_train_oneloop: dimension mismatch");
  const VectorX<Scalar> yt = basis.basis.transpose() * y;
  const auto& l = basis.resolvent_weights;
  Scalar sum = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Scalar yy = yt(i) * yt(j);
      for (Index k = 0; k < n; ++k) {
        const Scalar w = l(i) * l(j) * l(k) * (l(i) + l(j) + l(k));
        sum += yy * sv(i, k, k, j) * w;
      }
    }
  return basis.gamma * basis.gamma * sum / (static_cast<Scalar>(n) * static_cast<Scalar>(sv.values.width_used));
}

template <typename Scalar>
struct ResolventBound {
  Scalar tree = 0;
  Scalar one_loop = 0;
};

/// Upper bounds on the tree training error and on |one-loop| from the
/// smallest eigenvalue and V* = max |V~_(ik)(kj)|.
template <typename Scalar, typename Derived>
ResolventBound<Scalar> resolvent_bound(const SpectralBasis<Scalar>& basis, const SpectralVertex<Scalar>& sv,
                                       const Eigen::MatrixBase<Derived>& y) {
  const Index n = basis.size();
  detail::require_shape(y.size() == n && sv.values.points == n, "resolvent_bound: dimension mismatch");
  const VectorX<Scalar> yt = basis.basis.transpose() * y;
  Scalar v_star = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k) v_star = std::max(v_star, std::abs(sv(i, k, k, j)));
  const Scalar floor = basis.rho_min() + basis.gamma;
  const Scalar g2 = basis.gamma * basis.gamma;
  const Scalar N = static_cast<Scalar>(n);
  const Scalar l1 = yt.cwiseAbs().sum();
  ResolventBound<Scalar> b;
  b.tree = g2 * y.squaredNorm() / (N * floor * floor);
  b.one_loop = Scalar(3) * g2 * v_star * (N * l1 * l1) /
               (N * static_cast<Scalar>(sv.values.width_used) * floor * floor * floor * floor);
  return b;
}

/// sum_ij y~_i C~_ij y~_j l_i l_j - 2 sum_i b~_i y~_i l_i + c with C~ = U^T C U, b~ = U^T b.
template <typename Scalar, typename DerivedC, typename DerivedB, typename DerivedY>
Scalar spectral_test_quadratic(const SpectralBasis<Scalar>& basis, const Eigen::MatrixBase<DerivedC>& C,
                               const Eigen::MatrixBase<DerivedB>& b, Scalar c, const Eigen::MatrixBase<DerivedY>& y) {
  detail::require_shape(y.size() == basis.size() && C.rows() == basis.size() && b.size() == basis.size(),
                        "spectral_test_tree: dimension mismatch");
  const MatrixX<Scalar>& U = basis.basis;
  const MatrixX<Scalar> ct = U.transpose() * C * U;
  const VectorX<Scalar> bt = U.transpose() * b;
  const VectorX<Scalar> z = (U.transpose() * y).cwiseProduct(basis.resolvent_weights);
  return z.dot(ct * z) - Scalar(2) * bt.dot(z) + c;
}

template <typename Scalar, typename Derived>
Scalar spectral_test_tree(const SpectralBasis<Scalar>& basis, const MomentSet<Scalar>& m,
                          const Eigen::MatrixBase<Derived>& y) {
  if (!m.has_population()) throw ContractError("spectral_test_tree: moment set has no population operators");
  return spectral_test_quadratic(basis, m.mean_C, m.mean_b, m.c_scalar, y);
}

/// Split of the Monte-Carlo population operator, C = C0 + C1/n, with C0 the
/// test average of mbar(x) mbar(x)^T for the mean train-test kernel.
template <typename Scalar>
struct PopulationSplit {
  MatrixX<Scalar> C0;
  MatrixX<Scalar> C1;
};

template <typename Scalar>
PopulationSplit<Scalar> population_split(const MomentSet<Scalar>& m) {
  if (!m.has_population() || m.mean_kcross.cols() == 0)
    throw ContractError("population_split: moment set has no train-test kernel mean");
  PopulationSplit<Scalar> s;
  s.C0 = gram(m.mean_kcross, static_cast<Scalar>(m.mean_kcross.cols()));
  s.C1 = static_cast<Scalar>(m.width) * (m.mean_C - s.C0);
  return s;
}

/// Tree test error with the leading-order operator C0 in place of the full
/// Monte-Carlo C. The vector b is linear in the kernel, so its split has no
/// 1/n part and the Monte-Carlo mean is used as is.
template <typename Scalar, typename Derived>
Scalar spectral_test_tree_split(const SpectralBasis<Scalar>& basis, const MomentSet<Scalar>& m,
                                const Eigen::MatrixBase<Derived>& y) {
  const auto split = population_split(m);
  return spectral_test_quadratic(basis, split.C0, m.mean_b, m.c_scalar, y);
}

/// (1/n) sum_ij y~_i C1~_ij y~_j l_i l_j: the C1 share of the one-loop test term.
template <typename Scalar, typename Derived>
Scalar c1_spectral_term(const SpectralBasis<Scalar>& basis, const MomentSet<Scalar>& m,
                        const Eigen::MatrixBase<Derived>& y) {
  detail::require_shape(y.size() == basis.size(), "c1_spectral_term: target length != basis size");
  const auto split = population_split(m);
  const MatrixX<Scalar>& U = basis.basis;
  const MatrixX<Scalar> c1t = U.transpose() * split.C1 * U;
  const VectorX<Scalar> z = (U.transpose() * y).cwiseProduct(basis.resolvent_weights);
  return z.dot(c1t * z) / static_cast<Scalar>(m.width);
}

}  // namespace rfloop
