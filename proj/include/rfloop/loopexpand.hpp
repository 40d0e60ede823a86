#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rfloop/fluctuation.hpp"
#include "rfloop/kernelcore.hpp"

namespace rfloop {

enum class Observable { train, test, gap };

std::string_view to_string(Observable o);

/// Tree, one-loop and (optionally) second-loop terms of one observable.
template <typename Scalar>
struct LoopBreakdown {
  Observable observable = Observable::train;
  Scalar tree = 0;
  Scalar one_loop = 0;
  std::optional<Scalar> second_loop;
  Scalar total = 0;
  Scalar control = 0;
  int n_used = 0;
  Index N_used = 0;
  Scalar gamma_used = 0;
  std::uint64_t seed_block = 0;
};

/// Bare propagator G0 = (mean_K + gamma I)^{-1}, built once and shared by
/// every term of a breakdown.
template <typename Scalar>
struct Propagator {
  MatrixX<Scalar> G0;
  Scalar gamma = 0;
  Scalar jitter = 0;
};

template <typename Scalar>
Propagator<Scalar> make_propagator(const MomentSet<Scalar>& m, Scalar gamma) {
  auto inv = stabilized_inverse(m.mean_K, gamma);
  return {std::move(inv.inverse), gamma, inv.jitter};
}

namespace detail {

template <typename Scalar, typename Derived>
void require_train_targets(const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y, const char* op) {
  require_shape(y.size() == m.num_train(), std::string(op) + ": target length != training set size");
}

template <typename Scalar>
void require_population(const MomentSet<Scalar>& m, const char* op) {
  if (!m.has_population()) throw ContractError(std::string(op) + ": moment set has no population operators");
}

}  // namespace detail

/// (gamma^2/N) y^T G0^2 y.
template <typename Scalar, typename Derived>
Scalar tree_train(const Propagator<Scalar>& p, const Eigen::MatrixBase<Derived>& y) {
  const VectorX<Scalar> u = p.G0 * y;
  return p.gamma * p.gamma * u.squaredNorm() / static_cast<Scalar>(y.size());
}

template <typename Scalar, typename Derived>
Scalar tree_train(const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y, Scalar gamma) {
  detail::require_train_targets(m, y, "tree_train");
  return tree_train(make_propagator(m, gamma), y);
}

/// (gamma^2/N) y^T [G0^2 S(G0) G0 + G0 S(G0^2) G0 + G0 S(G0) G0^2] y with
/// S(A) the sandwich estimate of E[Delta A Delta] (it carries the 1/n).
template <typename Scalar, typename Derived>
Scalar oneloop_train(const Propagator<Scalar>& p, const FluctuationStore<Scalar>& st,
                     const Eigen::MatrixBase<Derived>& y) {
  const MatrixX<Scalar>& g = p.G0;
  const VectorX<Scalar> u = g * y;
  const VectorX<Scalar> u2 = g * u;
  const MatrixX<Scalar> s1 = sandwich_KK(st, g);
  const MatrixX<Scalar> s2 = sandwich_KK(st, g * g);
  const Scalar bracket = u2.dot(s1 * u) + u.dot(s2 * u) + u.dot(s1 * u2);
  return p.gamma * p.gamma * bracket / static_cast<Scalar>(y.size());
}

template <typename Scalar, typename Derived>
Scalar oneloop_train(const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y, Scalar gamma) {
  detail::require_train_targets(m, y, "oneloop_train");
  return oneloop_train(make_propagator(m, gamma), m.fluctuations(), y);
}

/// The same three-term one-loop training correction from an explicit vertex:
/// (gamma^2/(N n)) y^T [G0^2 (V*G0) G0 + G0 (V*G0^2) G0 + G0 (V*G0) G0^2] y.
template <typename Scalar, typename Derived>
Scalar oneloop_train_vertex(const Propagator<Scalar>& p, const VertexTensor<Scalar>& v,
                            const Eigen::MatrixBase<Derived>& y) {
  const MatrixX<Scalar>& g = p.G0;
  const VectorX<Scalar> u = g * y;
  const VectorX<Scalar> u2 = g * u;
  const MatrixX<Scalar> s1 = vertex_contract(v, g);
  const MatrixX<Scalar> s2 = vertex_contract(v, g * g);
  const Scalar bracket = u2.dot(s1 * u) + u.dot(s2 * u) + u.dot(s1 * u2);
  return p.gamma * p.gamma * bracket / (static_cast<Scalar>(y.size()) * static_cast<Scalar>(v.width_used));
}

/// -(gamma^2/N) y^T [G0^2 T(G0,G0) G0 + G0 T(G0^2,G0) G0 + G0 T(G0,G0^2) G0 + G0 T(G0,G0) G0^2] y
/// with T(A,B) the estimate of E[Delta A Delta B Delta].
template <typename Scalar, typename Derived>
Scalar secondloop_train(const Propagator<Scalar>& p, const FluctuationStore<Scalar>& st,
                        const Eigen::MatrixBase<Derived>& y) {
  const MatrixX<Scalar>& g = p.G0;
  const MatrixX<Scalar> g2 = g * g;
  const VectorX<Scalar> u = g * y;
  const VectorX<Scalar> u2 = g * u;
  const MatrixX<Scalar> t11 = sandwich_KKK(st, g, g);
  const MatrixX<Scalar> t21 = sandwich_KKK(st, g2, g);
  const MatrixX<Scalar> t12 = sandwich_KKK(st, g, g2);
  const Scalar bracket = u2.dot(t11 * u) + u.dot(t21 * u) + u.dot(t12 * u) + u.dot(t11 * u2);
  return -p.gamma * p.gamma * bracket / static_cast<Scalar>(y.size());
}

template <typename Scalar, typename Derived>
Scalar secondloop_train(const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y, Scalar gamma) {
  detail::require_train_targets(m, y, "secondloop_train");
  return secondloop_train(make_propagator(m, gamma), m.fluctuations(), y);
}

/// y^T G0 C G0 y - 2 b^T G0 y + c with the Monte-Carlo population operators.
template <typename Scalar, typename Derived>
Scalar tree_test(const Propagator<Scalar>& p, const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y) {
  detail::require_population(m, "tree_test");
  const VectorX<Scalar> u = p.G0 * y;
  return u.dot(m.mean_C * u) - Scalar(2) * m.mean_b.dot(u) + m.c_scalar;
}

template <typename Scalar, typename Derived>
Scalar tree_test(const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y, Scalar gamma) {
  detail::require_train_targets(m, y, "tree_test");
  return tree_test(make_propagator(m, gamma), m, y);
}

/// Seven-term one-loop test correction:
///   y^T [G0 S(G0) G0 C G0 + G0 C G0 S(G0) G0 + G0 S(G0 C G0) G0
///        - G0 M_KC(G0) G0 - G0 M_CK(G0) G0] y
///   - 2 b^T G0 S(G0) G0 y + 2 M_bK(G0) G0 y
/// where the mixed contractions pair Delta_K with Delta_C / Delta_b of the same draw.
template <typename Scalar, typename Derived>
Scalar oneloop_test(const Propagator<Scalar>& p, const MomentSet<Scalar>& m, const FluctuationStore<Scalar>& st,
                    const Eigen::MatrixBase<Derived>& y) {
  detail::require_population(m, "oneloop_test");
  const MatrixX<Scalar>& g = p.G0;
  const VectorX<Scalar> u = g * y;
  const VectorX<Scalar> w = g * (m.mean_C * u);
  const VectorX<Scalar> gb = g * m.mean_b;
  const MatrixX<Scalar> gcg = g * m.mean_C * g;
  const MatrixX<Scalar> s_g = sandwich_KK(st, g);
  const MatrixX<Scalar> s_gcg = sandwich_KK(st, gcg);
  const MatrixX<Scalar> kc = sandwich_KC(st, g);
  const MatrixX<Scalar> ck = sandwich_CK(st, g);
  const RowVectorX<Scalar> bk = sandwich_bK(st, g);
  const Scalar quad = u.dot(s_g * w) + w.dot(s_g * u) + u.dot(s_gcg * u) - u.dot(kc * u) - u.dot(ck * u);
  return quad - Scalar(2) * gb.dot(s_g * u) + Scalar(2) * bk.dot(u);
}

template <typename Scalar, typename Derived>
Scalar oneloop_test(const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y, Scalar gamma) {
  detail::require_train_targets(m, y, "oneloop_test");
  return oneloop_test(make_propagator(m, gamma), m, m.fluctuations(), y);
}

struct PredictOptions {
  bool include_second_loop = false;
  std::uint64_t seed_block = 0;
  /// Controls at or above this value mark the expansion as outside its regime.
  double control_threshold = 1.0;
};

template <typename Scalar>
struct Prediction {
  LoopBreakdown<Scalar> train;
  LoopBreakdown<Scalar> test;
  LoopBreakdown<Scalar> gap;
  ControlEstimate<Scalar> control;
  Scalar jitter = 0;
  bool flagged = false;

  const LoopBreakdown<Scalar>& operator[](Observable o) const {
    return o == Observable::train ? train : (o == Observable::test ? test : gap);
  }
};

/// Train/test/gap breakdowns from one propagator. Gap terms are formed as
/// exact differences of the test and train terms.
template <typename Scalar, typename Derived>
Prediction<Scalar> predict(const MomentSet<Scalar>& m, const Eigen::MatrixBase<Derived>& y, Scalar gamma,
                           const PredictOptions& opts = {}) {
  detail::require_train_targets(m, y, "predict");
  const auto& st = m.fluctuations();
  const Propagator<Scalar> p = make_propagator(m, gamma);

  Prediction<Scalar> out;
  out.control = control_parameter(st, p.G0);
  out.jitter = p.jitter;

  auto stamp = [&](LoopBreakdown<Scalar>& b, Observable o) {
    b.observable = o;
    b.control = out.control.mean;
    b.n_used = m.width;
    b.N_used = m.num_train();
    b.gamma_used = gamma;
    b.seed_block = opts.seed_block;
  };
  stamp(out.train, Observable::train);
  stamp(out.test, Observable::test);
  stamp(out.gap, Observable::gap);

  out.train.tree = tree_train(p, y);
  out.train.one_loop = oneloop_train(p, st, y);
  out.train.total = out.train.tree + out.train.one_loop;
  if (opts.include_second_loop) {
    out.train.second_loop = secondloop_train(p, st, y);
    out.train.total += *out.train.second_loop;
  }

  out.test.tree = tree_test(p, m, y);
  out.test.one_loop = oneloop_test(p, m, st, y);
  out.test.total = out.test.tree + out.test.one_loop;

  out.gap.tree = out.test.tree - out.train.tree;
  out.gap.one_loop = out.test.one_loop - out.train.one_loop;
  out.gap.total = out.gap.tree + out.gap.one_loop;

  const bool finite = std::isfinite(out.train.total) && std::isfinite(out.test.total) && std::isfinite(out.gap.total);
  out.flagged = !finite || !(out.control.mean < Scalar(opts.control_threshold));
  return out;
}

}  // namespace rfloop
