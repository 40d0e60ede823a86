#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rfloop/rng.hpp"
#include "rfloop/types.hpp"

namespace rfloop {

enum class Activation { tanh, relu, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Architecture and initialization scales of the frozen-network ensemble.
/// All hidden layers and the feature output share one width; the scales are
/// layer-uniform.
class EnsembleSpec {
 public:
  EnsembleSpec(int input_dim, int depth, int width, double weight_scale, double bias_scale,
               Activation activation);

  int input_dim() const { return input_dim_; }
  int depth() const { return depth_; }
  int width() const { return width_; }
  double weight_scale() const { return weight_scale_; }
  double bias_scale() const { return bias_scale_; }
  Activation activation() const { return activation_; }

  /// Fan-in of layer k (1-based).
  int fan_in(int layer) const { return layer == 1 ? input_dim_ : width_; }

  EnsembleSpec with_width(int width) const;
  EnsembleSpec with_depth(int depth) const;

  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;

 private:
  int input_dim_;
  int depth_;
  int width_;
  double weight_scale_;
  double bias_scale_;
  Activation activation_;
};

/// One frozen draw Theta = (W_1..W_L, b_1..b_L).
template <typename Scalar>
struct NetworkParams {
  std::vector<MatrixX<Scalar>> weights;  // layer k: width x fan_in(k)
  std::vector<VectorX<Scalar>> biases;   // layer k: width
  std::uint64_t seed = 0;
  Activation activation = Activation::tanh;

  int depth() const { return static_cast<int>(weights.size()); }
  int width() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
};

/// Features phi_i(x_j) of one network on a point set, one row per point.
template <typename Scalar>
struct FeatureMatrix {
  MatrixX<Scalar> values;
  std::string point_set_id;

  Index num_points() const { return values.rows(); }
  Index width() const { return values.cols(); }
};

/// Draws W_k ~ N(0, C_W / fan_in) and b_k ~ N(0, C_b) entrywise. Each layer
/// has its own stream keyed by (seed, layer), so the draw is a pure function
/// of (spec, seed).
template <typename Scalar = double>
NetworkParams<Scalar> sample_network(const EnsembleSpec& spec, std::uint64_t seed) {
  NetworkParams<Scalar> params;
  params.seed = seed;
  params.activation = spec.activation();
  params.weights.reserve(spec.depth());
  params.biases.reserve(spec.depth());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int layer = 1; layer <= spec.depth(); ++layer) {
    auto engine = make_engine(derive_seed(seed, {static_cast<std::uint64_t>(layer)}));
    const double w_std = std::sqrt(spec.weight_scale() / spec.fan_in(layer));
    const double b_std = std::sqrt(spec.bias_scale());
    MatrixX<Scalar> w(spec.width(), spec.fan_in(layer));
    for (Index c = 0; c < w.cols(); ++c)
      for (Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<Scalar>(w_std * normal(engine));
    VectorX<Scalar> b(spec.width());
    for (Index r = 0; r < b.size(); ++r) b(r) = static_cast<Scalar>(b_std * normal(engine));
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

template <typename Derived>
void apply_activation(Eigen::MatrixBase<Derived>& z, Activation a) {
  using Scalar = typename Derived::Scalar;
  switch (a) {
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::relu:
      z = z.array().max(Scalar(0)).matrix();
      break;
    case Activation::identity:
      break;
  }
}

/// z1 = W1 x + b1, z_{k+1} = W_{k+1} sigma(z_k) + b_{k+1}; the last layer is
/// left linear. `points` holds one input per row.
template <typename Scalar, typename Derived>
FeatureMatrix<Scalar> forward_features(const NetworkParams<Scalar>& params, const Eigen::MatrixBase<Derived>& points,
                                       std::string point_set_id = {}) {
  if (params.depth() == 0) throw ContractError("forward_features: network has no layers");
  detail::require_shape(points.cols() == params.input_dim(),
                        "forward_features: input has " + std::to_string(points.cols()) + " columns, network expects " +
                            std::to_string(params.input_dim()));
  const MatrixX<Scalar> x = points.template cast<Scalar>();
  if (!x.allFinite()) throw NumericError("forward_features: non-finite input");
  MatrixX<Scalar> z = x * params.weights[0].transpose();
  z.rowwise() += params.biases[0].transpose();
  if (!z.allFinite()) throw NumericError("forward_features: non-finite preactivation at layer 1");
  for (int layer = 1; layer < params.depth(); ++layer) {
    apply_activation(z, params.activation);
    MatrixX<Scalar> next = z * params.weights[layer].transpose();
    next.rowwise() += params.biases[layer].transpose();
    if (!next.allFinite())
      throw NumericError("forward_features: non-finite preactivation at layer " + std::to_string(layer + 1));
    z = std::move(next);
  }
  return {std::move(z), std::move(point_set_id)};
}

}  // namespace rfloop
