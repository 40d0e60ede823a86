#include "rfloop/snapshot.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace rfloop {
namespace {

constexpr std::array<char, 8> kMagic{'R', 'F', 'L', 'M', 'O', 'M', 'N', 'T'};

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ContractError("snapshot: truncated stream");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_f64(std::ostream& out, double x) { put_le(out, std::bit_cast<std::uint64_t>(x)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void put_matrix(std::ostream& out, const MatrixX<double>& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

MatrixX<double> get_matrix(std::istream& in, Index rows, Index cols) {
  MatrixX<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = get_f64(in);
  return m;
}

}  // namespace

void write_snapshot(std::ostream& out, const MomentSet<double>& m) {
  const bool has_store = m.store.has_value();
  const bool has_pop = has_store && m.store->has_population();
  const auto N = static_cast<std::uint64_t>(m.num_train());
  const auto M = static_cast<std::uint64_t>(m.mean_kcross.cols());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kSnapshotVersion);
  const bool has_means = m.has_population();
  put_le<std::uint32_t>(out, (has_store ? 1u : 0u) | (has_pop ? 2u : 0u) | (has_means ? 4u : 0u));
  put_le<std::uint64_t>(out, N);
  put_le<std::uint64_t>(out, M);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.num_samples));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.width));
  put_le<std::uint64_t>(out, has_store ? static_cast<std::uint64_t>(m.store->size()) : 0u);
  put_f64(out, m.c_scalar);
  put_matrix(out, m.mean_K);
  if (has_means) {
    put_matrix(out, m.mean_C);
    put_matrix(out, MatrixX<double>(m.mean_b));
  }
  put_matrix(out, m.mean_kcross);
  if (has_store) {
    for (Index s = 0; s < m.store->size(); ++s) {
      put_matrix(out, m.store->delta_K()[s]);
      if (has_pop) {
        put_matrix(out, m.store->delta_C()[s]);
        put_matrix(out, MatrixX<double>(m.store->delta_b()[s]));
      }
    }
  }
  if (!out) throw NumericError("snapshot: write failed");
}

MomentSet<double> read_snapshot(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ContractError("snapshot: bad magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kSnapshotVersion) throw ContractError("snapshot: unsupported version " + std::to_string(version));
  const auto flags = get_le<std::uint32_t>(in);
  const auto N = static_cast<Index>(get_le<std::uint64_t>(in));
  const auto M = static_cast<Index>(get_le<std::uint64_t>(in));
  MomentSet<double> m;
  m.num_samples = static_cast<Index>(get_le<std::uint64_t>(in));
  m.width = static_cast<int>(get_le<std::uint64_t>(in));
  const auto store_size = static_cast<Index>(get_le<std::uint64_t>(in));
  m.c_scalar = get_f64(in);
  m.mean_K = get_matrix(in, N, N);
  if (flags & 4u) {
    m.mean_C = get_matrix(in, N, N);
    m.mean_b = get_matrix(in, N, 1);
  }
  m.mean_kcross = get_matrix(in, N, M);
  if (flags & 1u) {
    std::vector<MatrixX<double>> dK, dC;
    std::vector<VectorX<double>> db;
    for (Index s = 0; s < store_size; ++s) {
      dK.push_back(get_matrix(in, N, N));
      if (flags & 2u) {
        dC.push_back(get_matrix(in, N, N));
        db.push_back(get_matrix(in, N, 1));
      }
    }
    m.store = FluctuationStore<double>::from_fluctuations(std::move(dK), std::move(dC), std::move(db));
  }
  return m;
}

void save_snapshot(const std::filesystem::path& path, const MomentSet<double>& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("snapshot: cannot open " + path.string());
  write_snapshot(out, m);
}

MomentSet<double> load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("snapshot: cannot open " + path.string());
  return read_snapshot(in);
}

}  // namespace rfloop
