#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rfloop/ensemble.hpp"
#include "rfloop/kernelcore.hpp"
#include "rfloop/parallel.hpp"
#include "rfloop/types.hpp"

namespace rfloop {

/// Centered per-sample fluctuations (Delta_K, Delta_C, Delta_b) of one
/// Monte-Carlo ensemble. Population fluctuations are optional; the kernel
/// ones are always present.
template <typename Scalar>
class FluctuationStore {
 public:
  FluctuationStore() = default;

  /// Centers raw per-sample K_s (and optionally C_s, b_s) on their own sample mean.
  static FluctuationStore from_samples(std::vector<MatrixX<Scalar>> K, std::vector<MatrixX<Scalar>> C = {},
                                       std::vector<VectorX<Scalar>> b = {}) {
    center(K);
    center(C);
    center(b);
    return from_fluctuations(std::move(K), std::move(C), std::move(b));
  }

  /// Takes fluctuations that are already centered (hand-built sets, S = 1 cases).
  static FluctuationStore from_fluctuations(std::vector<MatrixX<Scalar>> dK, std::vector<MatrixX<Scalar>> dC = {},
                                            std::vector<VectorX<Scalar>> db = {}) {
    if (dK.empty()) throw ContractError("FluctuationStore: no samples");
    const Index n = dK.front().rows();
    for (const auto& d : dK) detail::require_shape(d.rows() == n && d.cols() == n, "FluctuationStore: Delta_K shape");
    detail::require_shape(dC.empty() || dC.size() == dK.size(), "FluctuationStore: Delta_C count != Delta_K count");
    detail::require_shape(db.size() == dC.size(), "FluctuationStore: Delta_b count != Delta_C count");
    for (const auto& d : dC) detail::require_shape(d.rows() == n && d.cols() == n, "FluctuationStore: Delta_C shape");
    for (const auto& d : db) detail::require_shape(d.size() == n, "FluctuationStore: Delta_b shape");
    FluctuationStore s;
    s.dK_ = std::move(dK);
    s.dC_ = std::move(dC);
    s.db_ = std::move(db);
    return s;
  }

  Index size() const { return static_cast<Index>(dK_.size()); }
  Index num_train() const { return dK_.empty() ? 0 : dK_.front().rows(); }
  bool has_population() const { return !dC_.empty(); }

  const std::vector<MatrixX<Scalar>>& delta_K() const { return dK_; }
  const std::vector<MatrixX<Scalar>>& delta_C() const { return dC_; }
  const std::vector<VectorX<Scalar>>& delta_b() const { return db_; }

 private:
  template <typename T>
  static void center(std::vector<T>& xs) {
    if (xs.empty()) return;
    T mean = xs.front();
    for (std::size_t i = 1; i < xs.size(); ++i) mean += xs[i];
    mean /= static_cast<Scalar>(xs.size());
    for (auto& x : xs) x -= mean;
  }

  std::vector<MatrixX<Scalar>> dK_;
  std::vector<MatrixX<Scalar>> dC_;
  std::vector<VectorX<Scalar>> db_;
};

/// Monte-Carlo ensemble means of the training kernel, the population
/// operators and the train-test kernel, with an optional fluctuation store.
template <typename Scalar>
struct MomentSet {
  MatrixX<Scalar> mean_K;
  MatrixX<Scalar> mean_C;
  VectorX<Scalar> mean_b;
  MatrixX<Scalar> mean_kcross;  // N x M
  Scalar c_scalar = 0;
  Index num_samples = 0;
  int width = 0;
  std::optional<FluctuationStore<Scalar>> store;

  Index num_train() const { return mean_K.rows(); }
  bool has_population() const { return mean_C.size() > 0; }

  const FluctuationStore<Scalar>& fluctuations() const {
    if (!store) throw ContractError("MomentSet: fluctuation store was not retained");
    return *store;
  }
};

struct MomentOptions {
  bool retain_samples = false;
  unsigned workers = 1;
};

namespace detail {

template <typename Scalar>
struct MomentAccumulator {
  MatrixX<Scalar> K;
  MatrixX<Scalar> C;
  VectorX<Scalar> b;
  MatrixX<Scalar> k_cross;

  MomentAccumulator& operator+=(const MomentAccumulator& o) {
    K += o.K;
    C += o.C;
    b += o.b;
    k_cross += o.k_cross;
    return *this;
  }
};

}  // namespace detail

/// Draws `num_samples` networks keyed by replicate_seed(seed, s) and averages
/// K_s, C_s = <k_s k_s^T>_test, b_s = <y k_s>_test and k_s. With
/// `retain_samples`, the centered (Delta_K, Delta_C, Delta_b) of the same
/// draws are kept for contraction estimates.
template <typename Scalar, typename DerivedTrain, typename DerivedTest, typename DerivedY>
MomentSet<Scalar> estimate_moments(const EnsembleSpec& spec, const Eigen::MatrixBase<DerivedTrain>& x_train,
                                   const Eigen::MatrixBase<DerivedTest>& x_test,
                                   const Eigen::MatrixBase<DerivedY>& y_test, Index num_samples, std::uint64_t seed,
                                   const MomentOptions& opts = {}) {
  if (num_samples < 1) throw ContractError("estimate_moments: num_samples must be >= 1");
  if (opts.retain_samples && num_samples < 2)
    throw ContractError("estimate_moments: contraction estimates need num_samples >= 2");
  detail::require_shape(x_test.rows() == y_test.size() && y_test.size() > 0,
                        "estimate_moments: test targets do not match test inputs");
  const auto S = static_cast<std::size_t>(num_samples);
  std::vector<MatrixX<Scalar>> Ks, Cs;
  std::vector<VectorX<Scalar>> bs;
  if (opts.retain_samples) {
    Ks.resize(S);
    Cs.resize(S);
    bs.resize(S);
  }
  const VectorX<Scalar> yt = y_test.template cast<Scalar>();
  using Acc = detail::MomentAccumulator<Scalar>;
  Acc sum = map_reduce<Acc>(
      S, opts.workers,
      [&](std::size_t s) {
        const auto params = sample_network<Scalar>(spec, replicate_seed(seed, s));
        KernelBundle<Scalar> kb = realization_bundle(params, x_train, x_test, Scalar(0));
        auto ops = population_operators(kb.k_cross, yt);
        if (opts.retain_samples) {
          Ks[s] = kb.K;
          Cs[s] = ops.C;
          bs[s] = ops.b;
        }
        return Acc{std::move(kb.K), std::move(ops.C), std::move(ops.b), std::move(kb.k_cross)};
      },
      [](Acc a, const Acc& b) {
        a += b;
        return a;
      });
  const Scalar inv_s = Scalar(1) / static_cast<Scalar>(S);
  MomentSet<Scalar> m;
  m.mean_K = sum.K * inv_s;
  m.mean_C = sum.C * inv_s;
  m.mean_b = sum.b * inv_s;
  m.mean_kcross = sum.k_cross * inv_s;
  m.c_scalar = yt.squaredNorm() / static_cast<Scalar>(yt.size());
  m.num_samples = num_samples;
  m.width = spec.width();
  if (opts.retain_samples) m.store = FluctuationStore<Scalar>::from_samples(std::move(Ks), std::move(Cs), std::move(bs));
  return m;
}

namespace detail {

template <typename Scalar, typename DerivedA>
void require_store(const FluctuationStore<Scalar>& st, const Eigen::MatrixBase<DerivedA>& a, bool population,
                   const char* op) {
  require_shape(a.rows() == st.num_train() && a.cols() == st.num_train(),
                std::string(op) + ": contraction matrix must be N x N");
  if (population && !st.has_population())
    throw ContractError(std::string(op) + ": store has no population fluctuations");
}

template <typename Scalar>
Scalar covariance_norm(Index samples) {
  if (samples < 2) throw ContractError("sandwich estimate needs at least two samples");
  return Scalar(1) / static_cast<Scalar>(samples - 1);
}

}  // namespace detail

/// (1/(S-1)) sum_s Delta_K,s A Delta_K,s; symmetrized when A is symmetric.
template <typename Scalar, typename DerivedA>
MatrixX<Scalar> sandwich_KK(const FluctuationStore<Scalar>& st, const Eigen::MatrixBase<DerivedA>& a) {
  detail::require_store(st, a, false, "sandwich_KK");
  const MatrixX<Scalar> A = a;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(A.rows(), A.cols());
  for (const auto& d : st.delta_K()) out.noalias() += d * A * d;
  out *= detail::covariance_norm<Scalar>(st.size());
  if (A == A.transpose()) out = (out + out.transpose()) * Scalar(0.5);
  return out;
}

/// (1/(S-1)) sum_s Delta_K,s A Delta_C,s.
template <typename Scalar, typename DerivedA>
MatrixX<Scalar> sandwich_KC(const FluctuationStore<Scalar>& st, const Eigen::MatrixBase<DerivedA>& a) {
  detail::require_store(st, a, true, "sandwich_KC");
  const MatrixX<Scalar> A = a;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(A.rows(), A.cols());
  for (Index s = 0; s < st.size(); ++s) out.noalias() += st.delta_K()[s] * A * st.delta_C()[s];
  return out * detail::covariance_norm<Scalar>(st.size());
}

/// (1/(S-1)) sum_s Delta_C,s A Delta_K,s. Both fluctuations are symmetric, so
/// this is computed as sandwich_KC(A^T)^T and the identity holds bitwise.
template <typename Scalar, typename DerivedA>
MatrixX<Scalar> sandwich_CK(const FluctuationStore<Scalar>& st, const Eigen::MatrixBase<DerivedA>& a) {
  detail::require_store(st, a, true, "sandwich_CK");
  return sandwich_KC(st, a.transpose()).transpose();
}

/// (1/(S-1)) sum_s Delta_b,s^T A Delta_K,s as a row vector.
template <typename Scalar, typename DerivedA>
RowVectorX<Scalar> sandwich_bK(const FluctuationStore<Scalar>& st, const Eigen::MatrixBase<DerivedA>& a) {
  detail::require_store(st, a, true, "sandwich_bK");
  const MatrixX<Scalar> A = a;
  RowVectorX<Scalar> out = RowVectorX<Scalar>::Zero(A.cols());
  for (Index s = 0; s < st.size(); ++s) out.noalias() += (st.delta_b()[s].transpose() * A) * st.delta_K()[s];
  return out * detail::covariance_norm<Scalar>(st.size());
}

/// (1/S) sum_s Delta_K,s A Delta_K,s B Delta_K,s. Three insertions scale as n^{-3/2}.
template <typename Scalar, typename DerivedA, typename DerivedB>
MatrixX<Scalar> sandwich_KKK(const FluctuationStore<Scalar>& st, const Eigen::MatrixBase<DerivedA>& a,
                             const Eigen::MatrixBase<DerivedB>& b) {
  detail::require_store(st, a, false, "sandwich_KKK");
  detail::require_store(st, b, false, "sandwich_KKK");
  const MatrixX<Scalar> A = a;
  const MatrixX<Scalar> B = b;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(A.rows(), A.cols());
  for (const auto& d : st.delta_K()) out.noalias() += d * A * d * B * d;
  return out / static_cast<Scalar>(st.size());
}

/// Limits for materializing rank-4 vertex tensors.
struct VertexBudget {
  Index max_points = 64;
  std::size_t max_bytes = std::size_t(2) << 30;
};

/// Four-point vertex V_(ab)(cd) stored as an N^2 x N^2 pair matrix with
/// row a + N b and column c + N d.
template <typename Scalar>
struct VertexTensor {
  MatrixX<Scalar> pairs;
  Index points = 0;
  int width_used = 0;

  static Index pair(Index a, Index b, Index n) { return a + n * b; }
  Scalar operator()(Index a, Index b, Index c, Index d) const { return pairs(pair(a, b, points), pair(c, d, points)); }
  Scalar& operator()(Index a, Index b, Index c, Index d) { return pairs(pair(a, b, points), pair(c, d, points)); }
};

inline void check_vertex_budget(Index points, std::size_t scalar_bytes, const VertexBudget& budget) {
  const auto n2 = static_cast<std::size_t>(points) * static_cast<std::size_t>(points);
  const std::size_t bytes = n2 * n2 * scalar_bytes;
  if (points > budget.max_points || bytes > budget.max_bytes) {
    throw BudgetError("vertex tensor for N=" + std::to_string(points) + " needs " + std::to_string(bytes) +
                      " bytes (cap N<=" + std::to_string(budget.max_points) + ", " + std::to_string(budget.max_bytes) +
                      " bytes); use the sandwich contractions instead");
  }
}

/// Averages every entry over the eight index symmetries of V. Each orbit is
/// summed in sorted order, so all symmetric images get bitwise-equal values.
template <typename Scalar>
void symmetrize_vertex(VertexTensor<Scalar>& v) {
  const Index n = v.points;
  VertexTensor<Scalar> out{MatrixX<Scalar>(v.pairs.rows(), v.pairs.cols()), n, v.width_used};
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      for (Index c = 0; c < n; ++c)
        for (Index d = 0; d < n; ++d) {
          std::array<Scalar, 8> orbit{v(a, b, c, d), v(b, a, c, d), v(a, b, d, c), v(b, a, d, c),
                                      v(c, d, a, b), v(d, c, a, b), v(c, d, b, a), v(d, c, b, a)};
          std::sort(orbit.begin(), orbit.end());
          Scalar acc = 0;
          for (Scalar x : orbit) acc += x;
          out(a, b, c, d) = acc / Scalar(8);
        }
  v = std::move(out);
}

/// V_hat = n * (1/(S-1)) sum_s vec(Delta_K,s) vec(Delta_K,s)^T, symmetrized.
template <typename Scalar>
VertexTensor<Scalar> vertex_from_store(const FluctuationStore<Scalar>& st, int width, const VertexBudget& budget = {}) {
  const Index n = st.num_train();
  check_vertex_budget(n, sizeof(Scalar), budget);
  VertexTensor<Scalar> v{MatrixX<Scalar>::Zero(n * n, n * n), n, width};
  const Scalar scale = static_cast<Scalar>(width) * detail::covariance_norm<Scalar>(st.size());
  for (const auto& d : st.delta_K()) {
    const Eigen::Map<const VectorX<Scalar>> flat(d.data(), d.size());
    v.pairs.template selfadjointView<Eigen::Lower>().rankUpdate(flat, scale);
  }
  mirror_lower(v.pairs);
  symmetrize_vertex(v);
  return v;
}

/// Samples `num_samples` networks on `x` and returns the symmetrized vertex estimate.
template <typename Scalar, typename Derived>
VertexTensor<Scalar> estimate_vertex(const EnsembleSpec& spec, const Eigen::MatrixBase<Derived>& x, Index num_samples,
                                     std::uint64_t seed, const VertexBudget& budget = {}, unsigned workers = 1) {
  check_vertex_budget(x.rows(), sizeof(Scalar), budget);
  if (num_samples < 2) throw ContractError("estimate_vertex: num_samples must be >= 2");
  std::vector<MatrixX<Scalar>> Ks(static_cast<std::size_t>(num_samples));
  parallel_for(Ks.size(), workers, [&](std::size_t s) {
    const auto params = sample_network<Scalar>(spec, replicate_seed(seed, s));
    Ks[s] = gram(forward_features(params, x).values, static_cast<Scalar>(spec.width()));
  });
  return vertex_from_store(FluctuationStore<Scalar>::from_samples(std::move(Ks)), spec.width(), budget);
}

/// Monte-Carlo standard error of every V_hat entry, n * std_s(d_p d_q) / sqrt(S).
template <typename Scalar>
MatrixX<Scalar> vertex_standard_errors(const FluctuationStore<Scalar>& st, int width, const VertexBudget& budget = {}) {
  const Index n = st.num_train();
  check_vertex_budget(n, sizeof(Scalar), budget);
  const Index p = n * n;
  const auto S = static_cast<Scalar>(st.size());
  MatrixX<Scalar> sum = MatrixX<Scalar>::Zero(p, p);
  MatrixX<Scalar> sum_sq = MatrixX<Scalar>::Zero(p, p);
  for (const auto& d : st.delta_K()) {
    const Eigen::Map<const VectorX<Scalar>> flat(d.data(), d.size());
    const MatrixX<Scalar> prod = flat * flat.transpose();
    sum += prod;
    sum_sq += prod.cwiseProduct(prod);
  }
  const MatrixX<Scalar> mean = sum / S;
  const MatrixX<Scalar> var = ((sum_sq / S) - mean.cwiseProduct(mean)).cwiseMax(Scalar(0)) * (S / (S - 1));
  return static_cast<Scalar>(width) * (var / S).cwiseSqrt();
}

/// Smallest eigenvalue of the vertex viewed as a symmetric pair matrix.
template <typename Scalar>
Scalar vertex_min_pair_eigenvalue(const VertexTensor<Scalar>& v) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(v.pairs, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// (V * A)_(ad) = sum_{b,c} V_(ab)(cd) A_bc.
template <typename Scalar, typename DerivedA>
MatrixX<Scalar> vertex_contract(const VertexTensor<Scalar>& v, const Eigen::MatrixBase<DerivedA>& a) {
  const Index n = v.points;
  detail::require_shape(a.rows() == n && a.cols() == n, "vertex_contract: contraction matrix must be N x N");
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(n, n);
  for (Index d = 0; d < n; ++d)
    for (Index c = 0; c < n; ++c) {
      const Index col = VertexTensor<Scalar>::pair(c, d, n);
      for (Index b = 0; b < n; ++b) {
        const Scalar w = a(b, c);
        if (w == Scalar(0)) continue;
        out.col(d) += w * v.pairs.col(col).segment(b * n, n);
      }
    }
  return out;
}

template <typename Scalar>
struct ControlEstimate {
  Scalar mean = 0;
  Scalar standard_error = 0;
  Index samples = 0;
};

/// Spectral norm of a (generally non-symmetric) square product.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> mtm = gram(m.transpose(), Scalar(1));
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(mtm, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(Scalar(0), es.eigenvalues().maxCoeff()));
}

/// Mean over stored samples of ||G0 Delta_K,s||_2 for a given propagator G0.
template <typename Scalar, typename DerivedG>
ControlEstimate<Scalar> control_parameter(const FluctuationStore<Scalar>& st, const Eigen::MatrixBase<DerivedG>& g0) {
  detail::require_store(st, g0, false, "control_parameter");
  std::vector<Scalar> norms;
  norms.reserve(static_cast<std::size_t>(st.size()));
  for (const auto& d : st.delta_K()) norms.push_back(spectral_norm(g0 * d));
  ControlEstimate<Scalar> ce;
  ce.samples = st.size();
  Scalar sum = 0;
  for (Scalar x : norms) sum += x;
  ce.mean = sum / static_cast<Scalar>(norms.size());
  if (norms.size() > 1) {
    Scalar ss = 0;
    for (Scalar x : norms) ss += (x - ce.mean) * (x - ce.mean);
    ce.standard_error = std::sqrt(ss / static_cast<Scalar>(norms.size() - 1) / static_cast<Scalar>(norms.size()));
  }
  return ce;
}

/// E||G0 Delta||_2 with G0 = stabilized_inverse(mean_K, gamma).
template <typename Scalar>
ControlEstimate<Scalar> control_parameter(const MomentSet<Scalar>& m, Scalar gamma) {
  const auto g0 = stabilized_inverse(m.mean_K, gamma);
  return control_parameter(m.fluctuations(), g0.inverse);
}

}  // namespace rfloop
