#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rfloop/harness/experiment.hpp"

namespace rfloop::harness {

inline constexpr std::string_view kCsvHeader =
    "sweep_kind,value_n,value_L,value_gamma,value_N,obs,emp_mean,emp_stderr,tree,one_loop,second_loop,total,control,"
    "flagged";

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest decimal that round-trips to the same double.
std::string format_real(double v);

/// Header plus one row per observable per record. Contains no timings, so
/// identical inputs give identical bytes.
void write_csv(std::ostream& out, std::span<const SweepRecord> records);

std::string csv_file_name(SweepKind kind);

nlohmann::json to_json(const LoopBreakdown<double>& b);
nlohmann::json to_json(const SweepRecord& r);

/// Resolved config, seed blocks, versions and wall times.
nlohmann::json make_manifest(const ExperimentConfig& cfg, SweepKind kind, std::span<const SweepRecord> records,
                             double total_seconds);

/// Writes <dir>/<csv_file_name(kind)> and <dir>/manifest.json; returns the CSV path.
std::filesystem::path write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, SweepKind kind,
                                    std::span<const SweepRecord> records, double total_seconds);

}  // namespace rfloop::harness
