// rfloop: sweep drivers and the validation battery.
#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rfloop/harness/config.hpp"
#include "rfloop/harness/experiment.hpp"
#include "rfloop/harness/output.hpp"
#include "rfloop/harness/validate.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool fast = false;
  bool second_loop = false;
  std::optional<unsigned> workers;
  std::optional<int> width, depth, n_train;
  std::optional<double> gamma;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_flag("--fast", f.fast, "desk-scale replicate counts, widths <= 1024");
  cmd->add_flag("--second-loop", f.second_loop, "include the second-loop training term");
  cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  cmd->add_option("--width", f.width, "feature width n");
  cmd->add_option("--depth", f.depth, "depth L");
  cmd->add_option("--gamma", f.gamma, "kernel-level ridge parameter");
  cmd->add_option("--n-train", f.n_train, "training set size N");
}

rfloop::harness::ExperimentConfig resolve(const CommonFlags& f) {
  using namespace rfloop::harness;
  ExperimentConfig cfg = f.config_path.empty() ? ExperimentConfig{} : load_config(f.config_path);
  if (f.fast || cfg.fast) apply_fast_profile(cfg);
  if (f.out) cfg.output_dir = *f.out;
  if (f.seed) cfg.master_seed = *f.seed;
  if (f.second_loop) cfg.second_loop = true;
  if (f.workers) cfg.workers = *f.workers;
  if (f.width) cfg.width = *f.width;
  if (f.depth) cfg.depth = *f.depth;
  if (f.gamma) cfg.gamma = *f.gamma;
  if (f.n_train) cfg.N_train = *f.n_train;
  validate_config(cfg);
  return cfg;
}

int run_sweep_command(const CommonFlags& f, rfloop::harness::SweepKind kind) {
  using namespace rfloop::harness;
  const ExperimentConfig cfg = resolve(f);
  const auto start = std::chrono::steady_clock::now();
  const auto records = run_sweep(cfg, kind);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto path = write_outputs(cfg.output_dir, cfg, kind, records, secs);
  int flagged = 0;
  for (const auto& r : records) flagged += r.flagged ? 1 : 0;
  std::cout << "wrote " << path.string() << " (" << records.size() << " points, " << flagged << " flagged, "
            << secs << " s)\n";
  return 0;
}

int run_validate_command(const CommonFlags& f, bool inject_asymmetry) {
  using namespace rfloop::harness;
  const ExperimentConfig cfg = resolve(f);
  ValidateOptions opts;
  opts.inject_asymmetry = inject_asymmetry;
  const ValidationReport rep = validate(cfg, opts);
  const std::string text = rep.to_json().dump(2);
  if (f.out) {
    std::filesystem::create_directories(*f.out);
    std::ofstream(std::filesystem::path(*f.out) / "validate.json") << text << '\n';
  }
  std::cout << text << '\n';
  return rep.passed() ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-feature ridge regression: ensemble, tree and one-loop predictions"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    rfloop::harness::SweepKind kind;
  };
  const Sub sweeps[] = {
      {"sweep-width", "width sweep at fixed gamma", rfloop::harness::SweepKind::width},
      {"sweep-depth", "depth sweep at fixed width", rfloop::harness::SweepKind::depth},
      {"sweep-gamma", "regularization sweep", rfloop::harness::SweepKind::gamma},
      {"sweep-nn", "joint (N, n) grid", rfloop::harness::SweepKind::nn},
      {"point", "single point", rfloop::harness::SweepKind::point},
  };
  CommonFlags flags;
  std::vector<std::pair<CLI::App*, rfloop::harness::SweepKind>> sweep_cmds;
  for (const Sub& s : sweeps) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags);
    sweep_cmds.emplace_back(cmd, s.kind);
  }
  auto* val = app.add_subcommand("validate", "run the invariant battery and print a JSON report");
  add_common(val, flags);
  bool inject = false;
  val->add_flag("--inject-asymmetry", inject, "negative control: perturb a kernel so the symmetry check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*val) return run_validate_command(flags, inject);
    for (const auto& [cmd, kind] : sweep_cmds)
      if (*cmd) return run_sweep_command(flags, kind);
  } catch (const rfloop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rfloop::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
