#include "rfloop/ensemble.hpp"

namespace rfloop {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

EnsembleSpec::EnsembleSpec(int input_dim, int depth, int width, double weight_scale, double bias_scale,
                           Activation activation)
    : input_dim_(input_dim),
      depth_(depth),
      width_(width),
      weight_scale_(weight_scale),
      bias_scale_(bias_scale),
      activation_(activation) {
  if (input_dim < 1) throw ContractError("EnsembleSpec: input_dim must be >= 1");
  if (depth < 1) throw ContractError("EnsembleSpec: depth must be >= 1");
  if (width < 1) throw ContractError("EnsembleSpec: width must be >= 1");
  if (!(weight_scale >= 0.0) || !std::isfinite(weight_scale))
    throw ContractError("EnsembleSpec: weight_scale must be finite and >= 0");
  if (!(bias_scale >= 0.0) || !std::isfinite(bias_scale))
    throw ContractError("EnsembleSpec: bias_scale must be finite and >= 0");
}

EnsembleSpec EnsembleSpec::with_width(int width) const {
  return {input_dim_, depth_, width, weight_scale_, bias_scale_, activation_};
}

EnsembleSpec EnsembleSpec::with_depth(int depth) const {
  return {input_dim_, depth, width_, weight_scale_, bias_scale_, activation_};
}

}  // namespace rfloop
