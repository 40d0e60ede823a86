#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rfloop/ensemble.hpp"

namespace rfloop::harness {

enum class Target { sin2x, poly, abs };
enum class SweepKind { width, depth, gamma, nn, point };

std::string_view to_string(Target t);
std::string_view to_string(SweepKind k);
Target parse_target(std::string_view name);
SweepKind parse_sweep_kind(std::string_view name);

/// Values scanned by each sweep driver.
struct SweepPlan {
  std::vector<int> widths;
  std::vector<int> depths;
  std::vector<double> gammas;
  std::vector<int> nn_train_sizes;
  std::vector<int> nn_widths;
};

/// Log-spaced grid of `count` points over [lo, hi].
std::vector<double> log_grid(double lo, double hi, int count);

struct ExperimentConfig {
  Target target = Target::sin2x;
  int N_train = 64;
  int N_test = 1024;

  int input_dim = 1;
  int depth = 2;
  int width = 1024;
  double weight_scale = 1.0;
  double bias_scale = 0.05;
  Activation activation = Activation::tanh;

  double gamma = 5e-3;
  int reps_empirical = 400;
  int reps_mean = 400;
  int reps_contraction = 600;
  std::uint64_t master_seed = 20240611;

  SweepPlan sweep = default_sweep();
  bool second_loop = false;
  bool fast = false;
  unsigned workers = 0;
  std::string output_dir = "rfloop_out";

  EnsembleSpec ensemble() const { return {input_dim, depth, width, weight_scale, bias_scale, activation}; }

  static SweepPlan default_sweep();
};

/// Desk-scale profile: 100/100/150 replicates and widths capped at 1024.
void apply_fast_profile(ExperimentConfig& cfg);

/// Throws ConfigError on any violated invariant.
void validate_config(const ExperimentConfig& cfg);

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
/// Starts from the defaults and overrides every key present in `j`.
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace rfloop::harness
