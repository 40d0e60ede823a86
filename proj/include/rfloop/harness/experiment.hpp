#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rfloop/harness/config.hpp"
#include "rfloop/harness/dataset.hpp"
#include "rfloop/loopexpand.hpp"

namespace rfloop::harness {

inline constexpr std::array<Observable, 3> kObservables{Observable::train, Observable::test, Observable::gap};

struct EmpiricalStats {
  double mean = 0;
  double standard_error = 0;  // sample std / sqrt(reps)
};

/// Mean and standard error over realizations (ddof = 1; zero for a single value).
EmpiricalStats summarize(std::span<const double> values);

struct ObservableRecord {
  EmpiricalStats empirical;
  LoopBreakdown<double> loops;
};

struct SweepRecord {
  SweepKind kind = SweepKind::point;
  int n = 0;
  int L = 0;
  double gamma = 0;
  int N = 0;
  double lambda = 0;  // primal ridge parameter, gamma n / N
  std::array<ObservableRecord, 3> observables;
  double control = 0;
  double control_stderr = 0;
  double jitter = 0;
  bool flagged = false;
  double wall_time = 0;

  const ObservableRecord& operator[](Observable o) const { return observables[static_cast<std::size_t>(o)]; }
};

/// Everything a point needs that does not depend on gamma: the dataset,
/// per-realization observables of the empirical ensemble for each requested
/// gamma, the mean-ensemble moments and the contraction-ensemble store.
struct PointSamples {
  int n = 0;
  int L = 0;
  int N = 0;
  Dataset data;
  std::vector<double> gammas;
  std::vector<std::vector<Observables<double>>> empirical;  // [gamma][realization]
  MomentSet<double> moments;
  std::uint64_t contraction_block = 0;
  double sampling_seconds = 0;
};

/// Runs the three Monte-Carlo loops from disjoint seed blocks of cfg.master_seed.
PointSamples sample_point(const ExperimentConfig& cfg, int n, int L, int N, std::span<const double> gammas);

/// Record for gammas[gamma_index] of a sampled point.
SweepRecord evaluate_point(const ExperimentConfig& cfg, const PointSamples& samples, std::size_t gamma_index,
                           SweepKind kind);

SweepRecord run_point(const ExperimentConfig& cfg, int n, int L, double gamma, int N,
                      SweepKind kind = SweepKind::point);

/// Width sweep at fixed gamma (so lambda_n = gamma n / N varies), L = cfg.depth.
std::vector<SweepRecord> sweep_width(const ExperimentConfig& cfg);
/// Depth sweep at n = cfg.width.
std::vector<SweepRecord> sweep_depth(const ExperimentConfig& cfg);
/// Gamma sweep at (cfg.width, cfg.depth); one set of samples serves every gamma.
std::vector<SweepRecord> sweep_gamma(const ExperimentConfig& cfg);
/// Joint (N, n) grid, N outer.
std::vector<SweepRecord> sweep_nn(const ExperimentConfig& cfg);

std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg, SweepKind kind);

}  // namespace rfloop::harness
