#include <doctest.h>

#include <random>

#include "rfloop/loopexpand.hpp"
#include "rfloop/rng.hpp"
#include "rfloop/spectral.hpp"

using namespace rfloop;

namespace {

MatrixX<double> sym2(double a, double b, double c) { return (MatrixX<double>(2, 2) << a, b, b, c).finished(); }

// N = 2 moment set with a hand-built fluctuation store (S = 3).
MomentSet<double> hand_moments() {
  MomentSet<double> m;
  m.mean_K = sym2(1.5, 0.4, 0.9);
  m.mean_C = sym2(0.8, 0.3, 0.6);
  m.mean_b = (VectorX<double>(2) << 0.5, -0.2).finished();
  m.mean_kcross = MatrixX<double>::Zero(2, 2);
  m.c_scalar = 1.1;
  m.num_samples = 3;
  m.width = 10;
  std::vector<MatrixX<double>> dK{sym2(0.1, -0.05, 0.02), sym2(-0.08, 0.03, 0.01), sym2(-0.02, 0.02, -0.03)};
  std::vector<MatrixX<double>> dC{sym2(0.04, 0.01, -0.02), sym2(-0.01, -0.03, 0.02), sym2(-0.03, 0.02, 0.0)};
  std::vector<VectorX<double>> db{(VectorX<double>(2) << 0.02, -0.01).finished(),
                                  (VectorX<double>(2) << -0.03, 0.02).finished(),
                                  (VectorX<double>(2) << 0.01, -0.01).finished()};
  m.store = FluctuationStore<double>::from_fluctuations(dK, dC, db);
  return m;
}

MatrixX<double> avg_sandwich(const std::vector<MatrixX<double>>& l, const MatrixX<double>& a,
                             const std::vector<MatrixX<double>>& r) {
  MatrixX<double> out = MatrixX<double>::Zero(a.rows(), a.cols());
  for (std::size_t s = 0; s < l.size(); ++s) out += l[s] * a * r[s];
  return out / static_cast<double>(l.size() - 1);
}

}  // namespace

TEST_CASE("tree_train: hand values") {
  MomentSet<double> m;
  m.mean_K = MatrixX<double>::Identity(2, 2);
  const VectorX<double> y = (VectorX<double>(2) << 2.0, 0.0).finished();
  CHECK(tree_train(m, y, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  m.mean_K.setZero();
  CHECK(tree_train(m, y, 0.3) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("tree_test: null predictor gives c") {
  MomentSet<double> m = hand_moments();
  m.mean_C.setZero();
  m.mean_b.setZero();
  CHECK(tree_test(m, VectorX<double>::Ones(2), 0.2) == doctest::Approx(1.1).epsilon(1e-15));
}

TEST_CASE("one-loop train: N=2 hand expansion") {
  const auto m = hand_moments();
  const VectorX<double> y = (VectorX<double>(2) << 1.0, -0.7).finished();
  const double gamma = 0.25;
  const MatrixX<double> g = (m.mean_K + gamma * MatrixX<double>::Identity(2, 2)).inverse();
  const auto& dK = m.fluctuations().delta_K();
  const MatrixX<double> s1 = avg_sandwich(dK, g, dK);
  const MatrixX<double> s2 = avg_sandwich(dK, g * g, dK);
  const MatrixX<double> inner = g * g * s1 * g + g * s2 * g + g * s1 * g * g;
  const double expect = gamma * gamma / 2.0 * y.dot(inner * y);
  CHECK(oneloop_train(m, y, gamma) == doctest::Approx(expect).epsilon(1e-12));

  auto T = [&](const MatrixX<double>& a, const MatrixX<double>& b) {
    MatrixX<double> acc = MatrixX<double>::Zero(2, 2);
    for (const auto& d : dK) acc += d * a * d * b * d;
    return MatrixX<double>(acc / 3.0);
  };
  const MatrixX<double> inner2 = g * g * T(g, g) * g + g * T(g * g, g) * g + g * T(g, g * g) * g + g * T(g, g) * g * g;
  CHECK(secondloop_train(m, y, gamma) == doctest::Approx(-gamma * gamma / 2.0 * y.dot(inner2 * y)).epsilon(1e-12));
}

TEST_CASE("one-loop test: N=2, M=2 term-by-term hand expansion") {
  const auto m = hand_moments();
  const VectorX<double> y = (VectorX<double>(2) << 0.6, 1.2).finished();
  const double gamma = 0.4;
  const MatrixX<double> g = (m.mean_K + gamma * MatrixX<double>::Identity(2, 2)).inverse();
  const auto& st = m.fluctuations();
  const auto& dK = st.delta_K();
  const auto& dC = st.delta_C();
  const MatrixX<double>& C = m.mean_C;
  const MatrixX<double> sg = avg_sandwich(dK, g, dK);
  const MatrixX<double> sgcg = avg_sandwich(dK, g * C * g, dK);
  const MatrixX<double> kc = avg_sandwich(dK, g, dC);
  const MatrixX<double> ck = avg_sandwich(dC, g, dK);
  RowVectorX<double> bk = RowVectorX<double>::Zero(2);
  for (std::size_t s = 0; s < 3; ++s) bk += st.delta_b()[s].transpose() * g * dK[s];
  bk /= 2.0;
  const MatrixX<double> quad = g * sg * g * C * g + g * C * g * sg * g + g * sgcg * g - g * kc * g - g * ck * g;
  const double expect = y.dot(quad * y) - 2.0 * m.mean_b.dot(g * sg * g * y) + 2.0 * bk.dot(g * y);
  CHECK(oneloop_test(m, y, gamma) == doctest::Approx(expect).epsilon(1e-12));

  const double tree = y.dot(g * C * g * y) - 2.0 * m.mean_b.dot(g * y) + m.c_scalar;
  CHECK(tree_test(m, y, gamma) == doctest::Approx(tree).epsilon(1e-13));
}

TEST_CASE("zero fluctuations: every loop term vanishes") {
  MomentSet<double> m = hand_moments();
  const std::vector<MatrixX<double>> z(3, MatrixX<double>::Zero(2, 2));
  const std::vector<VectorX<double>> zb(3, VectorX<double>::Zero(2));
  m.store = FluctuationStore<double>::from_fluctuations(z, z, zb);
  const VectorX<double> y = VectorX<double>::Ones(2);
  const auto p = predict(m, y, 0.3, {true, 0, 1.0});
  CHECK(p.train.one_loop == 0.0);
  CHECK(*p.train.second_loop == 0.0);
  CHECK(p.test.one_loop == 0.0);
  CHECK(p.gap.tree == p.test.tree - p.train.tree);
  CHECK(p.control.mean == 0.0);
  CHECK_FALSE(p.flagged);
}

TEST_CASE("predict: totals, gap identities and echoed parameters") {
  const auto m = hand_moments();
  const VectorX<double> y = (VectorX<double>(2) << 0.3, -1.0).finished();
  const auto p = predict(m, y, 0.2, {true, 77, 1.0});
  CHECK(p.train.total == p.train.tree + p.train.one_loop + *p.train.second_loop);
  CHECK(p.test.total == p.test.tree + p.test.one_loop);
  CHECK(p.gap.tree == p.test.tree - p.train.tree);
  CHECK(p.gap.one_loop == p.test.one_loop - p.train.one_loop);
  CHECK(p.gap.total == p.gap.tree + p.gap.one_loop);
  CHECK_FALSE(p.test.second_loop.has_value());
  for (Observable o : {Observable::train, Observable::test, Observable::gap}) {
    CHECK(p[o].observable == o);
    CHECK(p[o].n_used == 10);
    CHECK(p[o].N_used == 2);
    CHECK(p[o].gamma_used == 0.2);
    CHECK(p[o].seed_block == 77);
    CHECK(p[o].control == p.control.mean);
  }
  CHECK(to_string(Observable::gap) == "gap");
}

TEST_CASE("predict flags the non-perturbative regime but still returns values") {
  const EnsembleSpec spec(1, 2, 8, 1.0, 0.1, Activation::tanh);
  MatrixX<double> x(6, 1), xt(10, 1);
  x << -1.5, -0.9, -0.2, 0.3, 0.8, 1.4;
  xt = VectorX<double>::LinSpaced(10, -2, 2);
  const VectorX<double> yt = (2 * xt.col(0).array()).sin();
  const VectorX<double> y = (2 * x.col(0).array()).sin();
  const auto m = estimate_moments<double>(spec, x, xt, yt, 40, 3, {true, 1});
  const auto tight = predict(m, y, 1e-4);
  CHECK(tight.control.mean >= 1.0);
  CHECK(tight.flagged);
  CHECK(std::isfinite(tight.test.total));
  const auto loose = predict(m, y, 10.0);
  CHECK(loose.control.mean < 1.0);
  CHECK_FALSE(loose.flagged);
}

TEST_CASE("tree_train matches the spectral path; vertex path matches the sandwich path") {
  const EnsembleSpec spec(2, 2, 24, 1.2, 0.2, Activation::relu);
  MatrixX<double> x(6, 2);
  x << 1, 0, 0, 1, -1, 0.5, 0.3, -0.7, 1.2, 1.1, -0.4, -1.3;
  const VectorX<double> y = VectorX<double>::LinSpaced(6, -1, 1);
  const auto m = estimate_moments<double>(spec, x, x, VectorX<double>::Ones(6), 30, 5, {true, 1});
  const double gamma = 0.05;
  const auto basis = spectral_decompose(m.mean_K, gamma);
  CHECK(std::abs(tree_train(m, y, gamma) - spectral_train_tree(basis, y)) <= 1e-8 * tree_train(m, y, gamma));
  const auto p = make_propagator(m, gamma);
  const auto v = vertex_from_store(m.fluctuations(), m.width);
  const double a = oneloop_train(p, m.fluctuations(), y);
  const double b = oneloop_train_vertex(p, v, y);
  CHECK(std::abs(a - b) <= 1e-10 * std::abs(b));
}

TEST_CASE("depth-1 Wick check of the one-loop training correction") {
  // Analytic G as the bare propagator's kernel, Wick V for the contraction;
  // the sandwich path on sampled fluctuations must agree within 5 stderr.
  const double cw = 1.0, cb = 0.3;
  const int n = 32;
  const EnsembleSpec spec(2, 1, n, cw, cb, Activation::identity);
  MatrixX<double> x(4, 2);
  x << 1, 0, 0, 1, 0.6, -0.6, -1, 0.4;
  const VectorX<double> y = (VectorX<double>(4) << 1, -0.5, 0.3, 0.8).finished();
  const Index S = 3000;
  const auto m = estimate_moments<double>(spec, x, x, VectorX<double>::Ones(4), S, 17, {true, 1});
  const MatrixX<double> gk = ((cw / 2) * (x * x.transpose())).array() + cb;
  const double gamma = 0.5;
  const Propagator<double> p{(gk + gamma * MatrixX<double>::Identity(4, 4)).inverse(), gamma, 0};

  VertexTensor<double> wick{MatrixX<double>(16, 16), 4, n};
  for (Index a = 0; a < 4; ++a)
    for (Index b = 0; b < 4; ++b)
      for (Index c = 0; c < 4; ++c)
        for (Index d = 0; d < 4; ++d) wick(a, b, c, d) = gk(a, c) * gk(b, d) + gk(a, d) * gk(b, c);
  const double exact = oneloop_train_vertex(p, wick, y);

  const MatrixX<double>& g = p.G0;
  const VectorX<double> u = g * y, u2 = g * u;
  std::vector<double> t;
  for (const auto& d : m.fluctuations().delta_K())
    t.push_back(gamma * gamma / 4.0 * (u2.dot(d * g * d * u) + u.dot(d * g * g * d * u) + u.dot(d * g * d * u2)));
  double mean = 0, ss = 0;
  for (double v : t) mean += v / static_cast<double>(S);
  for (double v : t) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (S - 1) / S);
  const double estimate = oneloop_train(p, m.fluctuations(), y);
  CHECK(estimate == doctest::Approx(mean * S / (S - 1)).epsilon(1e-10));
  CHECK(std::abs(estimate - exact) < 5 * se);
}

TEST_CASE("second loop decays faster than one loop with width") {
  const EnsembleSpec base(1, 2, 16, 1.0, 0.1, Activation::tanh);
  MatrixX<double> x(6, 1);
  x << -1.5, -0.9, -0.2, 0.3, 0.8, 1.4;
  const VectorX<double> y = (2 * x.col(0).array()).sin();
  std::vector<double> lx, l1, l2;
  for (int n : {16, 32, 64, 128, 256}) {
    const auto m = estimate_moments<double>(base.with_width(n), x, x, VectorX<double>::Ones(6), 400, 9, {true, 1});
    const auto pr = predict(m, y, 0.1, {true, 0, 1.0});
    lx.push_back(std::log(n));
    l1.push_back(std::log(std::abs(pr.train.one_loop)));
    l2.push_back(std::log(std::abs(*pr.train.second_loop)));
  }
  auto slope = [&](const std::vector<double>& ly) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i] / lx.size();
      my += ly[i] / lx.size();
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
  };
  MESSAGE("one-loop slope " << slope(l1) << ", second-loop slope " << slope(l2));
  CHECK(slope(l2) <= -1.2);
  CHECK(slope(l2) < slope(l1));
}

TEST_CASE("missing inputs are contract errors") {
  MomentSet<double> m = hand_moments();
  CHECK_THROWS_AS(tree_train(m, VectorX<double>::Ones(3), 0.1), ShapeError);
  m.mean_C.resize(0, 0);
  CHECK_THROWS_AS(tree_test(m, VectorX<double>::Ones(2), 0.1), ContractError);
  m.store.reset();
  CHECK_THROWS_AS(oneloop_train(m, VectorX<double>::Ones(2), 0.1), ContractError);
}
