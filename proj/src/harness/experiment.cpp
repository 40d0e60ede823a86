#include "rfloop/harness/experiment.hpp"

#include <chrono>
#include <cmath>

#include "rfloop/parallel.hpp"
#include "rfloop/rng.hpp"

namespace rfloop::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

EmpiricalStats summarize(std::span<const double> values) {
  if (values.empty()) throw ContractError("summarize: no values");
  const double count = static_cast<double>(values.size());
  double sum = 0;
  for (double v : values) sum += v;
  EmpiricalStats s;
  s.mean = sum / count;
  if (values.size() < 2) return s;
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.standard_error = std::sqrt(ss / (count - 1) / count);
  return s;
}

PointSamples sample_point(const ExperimentConfig& cfg, int n, int L, int N, std::span<const double> gammas) {
  if (gammas.empty()) throw ContractError("sample_point: no gamma values");
  const auto start = Clock::now();
  const EnsembleSpec spec = cfg.ensemble().with_width(n).with_depth(L);
  const unsigned workers = resolve_workers(cfg.workers);

  PointSamples ps;
  ps.n = n;
  ps.L = L;
  ps.N = N;
  ps.gammas.assign(gammas.begin(), gammas.end());
  ps.data = make_dataset(cfg.target, N, cfg.N_test, block_seed(cfg.master_seed, SeedBlock::dataset));
  const Dataset& d = ps.data;

  const auto reps = static_cast<std::size_t>(cfg.reps_empirical);
  ps.empirical.assign(gammas.size(), std::vector<Observables<double>>(reps));
  const std::uint64_t emp_block = block_seed(cfg.master_seed, SeedBlock::empirical);
  parallel_for(reps, workers, [&](std::size_t r) {
    const auto params = sample_network<double>(spec, replicate_seed(emp_block, r));
    KernelBundle<double> kb = realization_bundle(params, d.x_train, d.x_test, 0.0);
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      kb.gamma = gammas[g];
      ps.empirical[g][r] = evaluate_observables(kb, d.y_train, d.y_test);
    }
  });

  MomentOptions mean_opts{false, workers};
  ps.moments = estimate_moments<double>(spec, d.x_train, d.x_test, d.y_test, cfg.reps_mean,
                                        block_seed(cfg.master_seed, SeedBlock::mean), mean_opts);
  ps.contraction_block = block_seed(cfg.master_seed, SeedBlock::contraction);
  MomentOptions store_opts{true, workers};
  auto contraction = estimate_moments<double>(spec, d.x_train, d.x_test, d.y_test, cfg.reps_contraction,
                                              ps.contraction_block, store_opts);
  ps.moments.store = std::move(contraction.store);
  ps.sampling_seconds = seconds_since(start);
  return ps;
}

SweepRecord evaluate_point(const ExperimentConfig& cfg, const PointSamples& ps, std::size_t gamma_index,
                           SweepKind kind) {
  if (gamma_index >= ps.gammas.size()) throw ContractError("evaluate_point: gamma index out of range");
  const auto start = Clock::now();
  const double gamma = ps.gammas[gamma_index];

  PredictOptions opts;
  opts.include_second_loop = cfg.second_loop;
  opts.seed_block = ps.contraction_block;
  const Prediction<double> pred = predict(ps.moments, ps.data.y_train, gamma, opts);

  SweepRecord rec;
  rec.kind = kind;
  rec.n = ps.n;
  rec.L = ps.L;
  rec.gamma = gamma;
  rec.N = ps.N;
  rec.lambda = primal_lambda(gamma, ps.N, ps.n);
  rec.control = pred.control.mean;
  rec.control_stderr = pred.control.standard_error;
  rec.jitter = pred.jitter;
  rec.flagged = pred.flagged;

  const auto& emp = ps.empirical[gamma_index];
  std::vector<double> values(emp.size());
  for (Observable o : kObservables) {
    for (std::size_t r = 0; r < emp.size(); ++r)
      values[r] = o == Observable::train ? emp[r].train_error : (o == Observable::test ? emp[r].test_error : emp[r].gap);
    auto& out = rec.observables[static_cast<std::size_t>(o)];
    out.empirical = summarize(values);
    out.loops = pred[o];
    if (!std::isfinite(out.empirical.mean)) rec.flagged = true;
  }
  rec.wall_time = ps.sampling_seconds / static_cast<double>(ps.gammas.size()) + seconds_since(start);
  return rec;
}

SweepRecord run_point(const ExperimentConfig& cfg, int n, int L, double gamma, int N, SweepKind kind) {
  const double g[] = {gamma};
  return evaluate_point(cfg, sample_point(cfg, n, L, N, g), 0, kind);
}

std::vector<SweepRecord> sweep_width(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> out;
  for (int n : cfg.sweep.widths) out.push_back(run_point(cfg, n, cfg.depth, cfg.gamma, cfg.N_train, SweepKind::width));
  return out;
}

std::vector<SweepRecord> sweep_depth(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> out;
  for (int L : cfg.sweep.depths) out.push_back(run_point(cfg, cfg.width, L, cfg.gamma, cfg.N_train, SweepKind::depth));
  return out;
}

std::vector<SweepRecord> sweep_gamma(const ExperimentConfig& cfg) {
  const PointSamples ps = sample_point(cfg, cfg.width, cfg.depth, cfg.N_train, cfg.sweep.gammas);
  std::vector<SweepRecord> out;
  for (std::size_t g = 0; g < ps.gammas.size(); ++g) out.push_back(evaluate_point(cfg, ps, g, SweepKind::gamma));
  return out;
}

std::vector<SweepRecord> sweep_nn(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> out;
  for (int N : cfg.sweep.nn_train_sizes)
    for (int n : cfg.sweep.nn_widths) out.push_back(run_point(cfg, n, cfg.depth, cfg.gamma, N, SweepKind::nn));
  return out;
}

std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg, SweepKind kind) {
  validate_config(cfg);
  switch (kind) {
    case SweepKind::width:
      return sweep_width(cfg);
    case SweepKind::depth:
      return sweep_depth(cfg);
    case SweepKind::gamma:
      return sweep_gamma(cfg);
    case SweepKind::nn:
      return sweep_nn(cfg);
    case SweepKind::point:
      return {run_point(cfg, cfg.width, cfg.depth, cfg.gamma, cfg.N_train)};
  }
  throw ConfigError("run_sweep: unknown sweep kind");
}

}  // namespace rfloop::harness
