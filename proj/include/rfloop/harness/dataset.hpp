#pragma once

#include <cstdint>

#include "rfloop/harness/config.hpp"
#include "rfloop/types.hpp"

namespace rfloop::harness {

/// Unnormalized target value.
double target_value(Target t, double x);

/// One-dimensional train/test split with targets normalized by the
/// training-set mean and (population) standard deviation.
struct Dataset {
  MatrixX<double> x_train;  // N x 1
  VectorX<double> y_train;
  MatrixX<double> x_test;  // M x 1
  VectorX<double> y_test;
  double target_mean = 0;
  double target_std = 1;

  Index num_train() const { return x_train.rows(); }
  Index num_test() const { return x_test.rows(); }
};

/// Standard-normal inputs drawn from two independent streams of `seed`, so the
/// test split does not depend on the training size and smaller training sets
/// are prefixes of larger ones. Throws ConfigError on zero target variance.
Dataset make_dataset(Target target, int num_train, int num_test, std::uint64_t seed);

Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace rfloop::harness
