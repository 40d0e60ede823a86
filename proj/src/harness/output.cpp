#include "rfloop/harness/output.hpp"

#include <Eigen/Core>
#include <array>
#include <charconv>
#include <fstream>
#include <ostream>

#include "rfloop/rng.hpp"

namespace rfloop::harness {

std::string format_real(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_csv(std::ostream& out, std::span<const SweepRecord> records) {
  out << kCsvHeader << '\n';
  for (const SweepRecord& r : records) {
    for (Observable o : kObservables) {
      const ObservableRecord& ob = r[o];
      out << to_string(r.kind) << ',' << r.n << ',' << r.L << ',' << format_real(r.gamma) << ',' << r.N << ','
          << to_string(o) << ',' << format_real(ob.empirical.mean) << ',' << format_real(ob.empirical.standard_error)
          << ',' << format_real(ob.loops.tree) << ',' << format_real(ob.loops.one_loop) << ','
          << (ob.loops.second_loop ? format_real(*ob.loops.second_loop) : std::string()) << ','
          << format_real(ob.loops.total) << ',' << format_real(r.control) << ',' << (r.flagged ? 1 : 0) << '\n';
    }
  }
}

std::string csv_file_name(SweepKind kind) {
  if (kind == SweepKind::point) return "point.csv";
  return "sweep_" + std::string(to_string(kind)) + ".csv";
}

namespace {

// JSON has no NaN/Inf; non-finite values are written as null.
nlohmann::json real(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const LoopBreakdown<double>& b) {
  return {
      {"observable", to_string(b.observable)},
      {"tree", real(b.tree)},
      {"one_loop", real(b.one_loop)},
      {"second_loop", b.second_loop ? real(*b.second_loop) : nlohmann::json(nullptr)},
      {"total", real(b.total)},
      {"control", real(b.control)},
      {"n", b.n_used},
      {"N", b.N_used},
      {"gamma", b.gamma_used},
      {"seed_block", b.seed_block},
  };
}

nlohmann::json to_json(const SweepRecord& r) {
  nlohmann::json obs = nlohmann::json::object();
  for (Observable o : kObservables) {
    const ObservableRecord& ob = r[o];
    obs[std::string(to_string(o))] = {{"emp_mean", real(ob.empirical.mean)},
                                      {"emp_stderr", real(ob.empirical.standard_error)},
                                      {"loops", to_json(ob.loops)}};
  }
  return {
      {"sweep_kind", to_string(r.kind)},
      {"n", r.n},
      {"L", r.L},
      {"gamma", r.gamma},
      {"N", r.N},
      {"lambda", r.lambda},
      {"control", real(r.control)},
      {"control_stderr", real(r.control_stderr)},
      {"jitter", r.jitter},
      {"flagged", r.flagged},
      {"wall_time", r.wall_time},
      {"observables", obs},
  };
}

nlohmann::json make_manifest(const ExperimentConfig& cfg, SweepKind kind, std::span<const SweepRecord> records,
                             double total_seconds) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) recs.push_back(to_json(r));
  nlohmann::json config;
  to_json(config, cfg);
  return {
      {"tool", "rfloop"},
      {"version", kToolVersion},
      {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
      {"sweep_kind", to_string(kind)},
      {"csv", csv_file_name(kind)},
      {"config", config},
      {"seed_blocks",
       {{"master", cfg.master_seed},
        {"dataset", block_seed(cfg.master_seed, SeedBlock::dataset)},
        {"empirical", block_seed(cfg.master_seed, SeedBlock::empirical)},
        {"mean", block_seed(cfg.master_seed, SeedBlock::mean)},
        {"contraction", block_seed(cfg.master_seed, SeedBlock::contraction)}}},
      {"records", recs},
      {"total_wall_time", total_seconds},
  };
}

std::filesystem::path write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, SweepKind kind,
                                    std::span<const SweepRecord> records, double total_seconds) {
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / csv_file_name(kind);
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    write_csv(csv, records);
  }
  std::ofstream man(dir / "manifest.json", std::ios::binary);
  if (!man) throw std::runtime_error("cannot write manifest in " + dir.string());
  man << make_manifest(cfg, kind, records, total_seconds).dump(2) << '\n';
  return csv_path;
}

}  // namespace rfloop::harness
