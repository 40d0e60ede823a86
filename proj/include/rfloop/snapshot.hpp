#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "rfloop/fluctuation.hpp"

namespace rfloop {

/// Binary MomentSet snapshot, little-endian throughout:
///   magic "RFLMOMNT" | u32 version
///   u32 flags (1: store, 2: store has population, 4: population means)
///   u64 N | u64 M | u64 num_samples | u64 width | u64 store_size | f64 c
///   mean_K (N x N) [| mean_C (N x N) | mean_b (N)] | mean_kcross (N x M)
///   per stored sample: Delta_K (N x N) [| Delta_C (N x N) | Delta_b (N)]
/// Matrices are row-major f64.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_snapshot(std::ostream& out, const MomentSet<double>& m);
MomentSet<double> read_snapshot(std::istream& in);

void save_snapshot(const std::filesystem::path& path, const MomentSet<double>& m);
MomentSet<double> load_snapshot(const std::filesystem::path& path);

}  // namespace rfloop
