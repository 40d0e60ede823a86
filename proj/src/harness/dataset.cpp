#include "rfloop/harness/dataset.hpp"

#include <cmath>
#include <random>

#include "rfloop/errors.hpp"
#include "rfloop/rng.hpp"

namespace rfloop::harness {

double target_value(Target t, double x) {
  switch (t) {
    case Target::sin2x:
      return std::sin(2.0 * x);
    case Target::poly:
      return ((0.4 * x - 0.6) * x + 0.2) * x;
    case Target::abs:
      return std::abs(x);
  }
  throw ConfigError("target_value: unknown target");
}

namespace {

MatrixX<double> normal_inputs(std::uint64_t key, int count) {
  auto eng = make_engine(key);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixX<double> x(count, 1);
  for (int i = 0; i < count; ++i) x(i, 0) = normal(eng);
  return x;
}

VectorX<double> targets(Target t, const MatrixX<double>& x) {
  VectorX<double> y(x.rows());
  for (Index i = 0; i < x.rows(); ++i) y(i) = target_value(t, x(i, 0));
  return y;
}

}  // namespace

Dataset make_dataset(Target target, int num_train, int num_test, std::uint64_t seed) {
  if (num_train < 1 || num_test < 1) throw ConfigError("make_dataset: split sizes must be positive");
  Dataset d;
  d.x_train = normal_inputs(derive_seed(seed, {0}), num_train);
  d.x_test = normal_inputs(derive_seed(seed, {1}), num_test);
  d.y_train = targets(target, d.x_train);
  d.y_test = targets(target, d.x_test);

  d.target_mean = d.y_train.mean();
  const double var = (d.y_train.array() - d.target_mean).square().mean();
  // N = 1 or a constant target leaves nothing to normalize by.
  if (!(var > 1e-24)) throw ConfigError("make_dataset: training targets have zero variance");
  d.target_std = std::sqrt(var);
  d.y_train = (d.y_train.array() - d.target_mean) / d.target_std;
  d.y_test = (d.y_test.array() - d.target_mean) / d.target_std;
  return d;
}

Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  return make_dataset(cfg.target, cfg.N_train, cfg.N_test, seed);
}

}  // namespace rfloop::harness
