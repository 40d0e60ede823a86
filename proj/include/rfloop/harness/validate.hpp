#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfloop/harness/config.hpp"

namespace rfloop::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0;      // measured deviation / statistic
  double threshold = 0;  // acceptance limit for `value`
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Agreement of two computations over a randomized battery.
struct BatteryResult {
  double max_deviation = 0;  // max |a - b| / max(|b|, tiny)
  int cases = 0;
};

/// Direct vs resolvent training error on random realizations
/// (N <= 32, n <= 256, every activation, gamma in [1e-2, 1]).
BatteryResult closed_form_battery(int cases, std::uint64_t seed);

/// Direct test error vs the (G, C, b, c) quadratic form on the same kind of battery.
BatteryResult quadratic_form_battery(int cases, std::uint64_t seed);

struct TwoPathResult {
  double sandwich_vs_vertex = 0;  // max |a - b| / max(|b|, 1)
  double spectral_vs_vertex = 0;
  double sandwich_vs_vertex_rel = 0;  // max |a - b| / |b|, for reporting
  double spectral_vs_vertex_rel = 0;
  double spectral_tree = 0;  // spectral vs resolvent tree
  int cases = 0;
};

/// One-loop training correction via sandwiches, the explicit vertex and the
/// eigenbasis, all from one shared sample store (N <= 8).
TwoPathResult two_path_battery(int cases, std::uint64_t seed);

struct WickResult {
  double max_z = 0;        // max |V_hat - V_wick| / stderr over entries
  double max_abs_dev = 0;  // max |V_hat - V_wick|
  int samples = 0;
};

/// Depth-1 identity-activation vertex against G_ac G_bd + G_ad G_bc.
WickResult wick_depth1_check(int samples, std::uint64_t seed);

struct BoundResult {
  int cases = 0;
  int tree_violations = 0;
  int oneloop_violations = 0;
};

/// Resolvent bounds on tree and |one-loop| training error over random small instances.
BoundResult bound_battery(int cases, std::uint64_t seed);

struct ValidateOptions {
  int identity_cases = 24;
  int two_path_cases = 4;
  int wick_samples = 2000;
  int bound_cases = 100;
  /// Negative control: perturb the checked kernel so the symmetry check must fail.
  bool inject_asymmetry = false;
};

/// The full invariant battery at desk scale. Never throws for a failed
/// check; failures (including unexpected exceptions) become report entries.
ValidationReport validate(const ExperimentConfig& cfg, const ValidateOptions& opts = {});

}  // namespace rfloop::harness
