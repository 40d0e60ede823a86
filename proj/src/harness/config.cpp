#include "rfloop/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace rfloop::harness {

std::string_view to_string(Target t) {
  switch (t) {
    case Target::sin2x:
      return "sin2x";
    case Target::poly:
      return "poly";
    case Target::abs:
      return "abs";
  }
  return "unknown";
}

std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::width:
      return "width";
    case SweepKind::depth:
      return "depth";
    case SweepKind::gamma:
      return "gamma";
    case SweepKind::nn:
      return "nn";
    case SweepKind::point:
      return "point";
  }
  return "unknown";
}

Target parse_target(std::string_view name) {
  if (name == "sin2x") return Target::sin2x;
  if (name == "poly") return Target::poly;
  if (name == "abs") return Target::abs;
  throw ConfigError("unknown target '" + std::string(name) + "' (expected sin2x, poly or abs)");
}

SweepKind parse_sweep_kind(std::string_view name) {
  if (name == "width") return SweepKind::width;
  if (name == "depth") return SweepKind::depth;
  if (name == "gamma") return SweepKind::gamma;
  if (name == "nn") return SweepKind::nn;
  if (name == "point") return SweepKind::point;
  throw ConfigError("unknown sweep kind '" + std::string(name) + "'");
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2) throw ConfigError("log_grid: need 0 < lo < hi and count >= 2");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (count - 1)));
  return out;
}

SweepPlan ExperimentConfig::default_sweep() {
  SweepPlan plan;
  for (int n = 256; n <= 2048; n += 128) plan.widths.push_back(n);
  plan.depths = {1, 2, 3, 4};
  plan.gammas = log_grid(1e-4, 1.0, 12);
  plan.nn_train_sizes = {16, 32, 64, 128};
  plan.nn_widths = {256, 512, 1024};
  return plan;
}

void apply_fast_profile(ExperimentConfig& cfg) {
  cfg.fast = true;
  cfg.reps_empirical = 100;
  cfg.reps_mean = 100;
  cfg.reps_contraction = 150;
  constexpr int kFastMaxWidth = 1024;
  auto cap = [](std::vector<int>& xs) { std::erase_if(xs, [](int n) { return n > kFastMaxWidth; }); };
  cap(cfg.sweep.widths);
  cap(cfg.sweep.nn_widths);
  cfg.width = std::min(cfg.width, kFastMaxWidth);
}

namespace {

template <typename T>
void require_increasing(const std::vector<T>& xs, const char* name) {
  if (xs.empty()) throw ConfigError(std::string("sweep.") + name + " must be non-empty");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i - 1] < xs[i])) throw ConfigError(std::string("sweep.") + name + " must be strictly increasing");
}

template <typename T>
void require_positive(const std::vector<T>& xs, const char* name) {
  for (T x : xs)
    if (!(x > 0)) throw ConfigError(std::string("sweep.") + name + " entries must be positive");
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.N_train < 2) throw ConfigError("N_train must be >= 2");
  if (cfg.N_test < 1) throw ConfigError("N_test must be >= 1");
  if (cfg.input_dim != 1) throw ConfigError("the synthetic targets are one-dimensional; input_dim must be 1");
  if (cfg.depth < 1 || cfg.width < 1) throw ConfigError("depth and width must be >= 1");
  if (!(cfg.weight_scale >= 0) || !(cfg.bias_scale >= 0)) throw ConfigError("weight/bias scales must be >= 0");
  if (!(cfg.gamma > 0) || !std::isfinite(cfg.gamma)) throw ConfigError("gamma must be positive and finite");
  if (cfg.reps_empirical < 1 || cfg.reps_mean < 1) throw ConfigError("replicate counts must be positive");
  if (cfg.reps_contraction < 2) throw ConfigError("reps_contraction must be >= 2");
  require_increasing(cfg.sweep.widths, "width");
  require_positive(cfg.sweep.widths, "width");
  require_increasing(cfg.sweep.depths, "depth");
  require_positive(cfg.sweep.depths, "depth");
  require_increasing(cfg.sweep.gammas, "gamma");
  require_positive(cfg.sweep.gammas, "gamma");
  require_increasing(cfg.sweep.nn_train_sizes, "nn.N");
  require_increasing(cfg.sweep.nn_widths, "nn.n");
  require_positive(cfg.sweep.nn_widths, "nn.n");
  for (int n : cfg.sweep.nn_train_sizes)
    if (n < 2) throw ConfigError("sweep.nn.N entries must be >= 2");
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  j = nlohmann::json{
      {"target", to_string(cfg.target)},
      {"N_train", cfg.N_train},
      {"N_test", cfg.N_test},
      {"ensemble",
       {{"input_dim", cfg.input_dim},
        {"depth", cfg.depth},
        {"width", cfg.width},
        {"weight_scale", cfg.weight_scale},
        {"bias_scale", cfg.bias_scale},
        {"activation", to_string(cfg.activation)}}},
      {"gamma", cfg.gamma},
      {"reps_empirical", cfg.reps_empirical},
      {"reps_mean", cfg.reps_mean},
      {"reps_contraction", cfg.reps_contraction},
      {"master_seed", cfg.master_seed},
      {"sweep",
       {{"width", cfg.sweep.widths},
        {"depth", cfg.sweep.depths},
        {"gamma", cfg.sweep.gammas},
        {"nn", {{"N", cfg.sweep.nn_train_sizes}, {"n", cfg.sweep.nn_widths}}}}},
      {"second_loop", cfg.second_loop},
      {"fast", cfg.fast},
      {"workers", cfg.workers},
      {"output_dir", cfg.output_dir},
  };
}

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("target")) cfg.target = parse_target(j.at("target").get<std::string>());
    read_if(j, "N_train", cfg.N_train);
    read_if(j, "N_test", cfg.N_test);
    if (j.contains("ensemble")) {
      const auto& e = j.at("ensemble");
      read_if(e, "input_dim", cfg.input_dim);
      read_if(e, "depth", cfg.depth);
      read_if(e, "width", cfg.width);
      read_if(e, "weight_scale", cfg.weight_scale);
      read_if(e, "bias_scale", cfg.bias_scale);
      if (e.contains("activation")) cfg.activation = parse_activation(e.at("activation").get<std::string>());
    }
    read_if(j, "gamma", cfg.gamma);
    read_if(j, "reps_empirical", cfg.reps_empirical);
    read_if(j, "reps_mean", cfg.reps_mean);
    read_if(j, "reps_contraction", cfg.reps_contraction);
    read_if(j, "master_seed", cfg.master_seed);
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      read_if(s, "width", cfg.sweep.widths);
      read_if(s, "depth", cfg.sweep.depths);
      read_if(s, "gamma", cfg.sweep.gammas);
      if (s.contains("nn")) {
        read_if(s.at("nn"), "N", cfg.sweep.nn_train_sizes);
        read_if(s.at("nn"), "n", cfg.sweep.nn_widths);
      }
    }
    read_if(j, "second_loop", cfg.second_loop);
    read_if(j, "fast", cfg.fast);
    read_if(j, "workers", cfg.workers);
    read_if(j, "output_dir", cfg.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig cfg;
  from_json(j, cfg);
  return cfg;
}

}  // namespace rfloop::harness
