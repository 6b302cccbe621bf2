#include "memvad/embedding.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "memvad/binary_io.hpp"
#include "memvad/corpus.hpp"
#include "memvad/error.hpp"
#include "rng.hpp"

namespace memvad {
namespace {

constexpr std::array<char, 4> kMagic{'F', 'B', 'E', 'M'};
constexpr std::uint64_t kHeaderBytes = 4 + 4 + 4 + 8;

void add_gaussian_direction(std::vector<double>& acc, std::uint64_t seed) {
  detail::SplitMix64 rng(seed);
  for (double& a : acc) a += rng.gaussian();
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), data_(rows * dim, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw Error(ErrorCategory::kValidation, "embedding dim must be positive");
  if (data_.size() != rows_ * dim_) {
    throw Error(ErrorCategory::kValidation,
                "embedding data has " + std::to_string(data_.size()) + " values, expected " +
                    std::to_string(rows_ * dim_));
  }
  check_finite();
}

void EmbeddingMatrix::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCategory::kValidation,
                  "non-finite embedding value at row " + std::to_string(i / dim_) + ", column " +
                      std::to_string(i % dim_));
    }
  }
}

void write_embeddings(std::ostream& out, const EmbeddingMatrix& matrix) {
  if (matrix.dim() == 0 || matrix.dim() > UINT32_MAX) {
    throw Error(ErrorCategory::kFormat, "embedding dim out of range for FBEM");
  }
  io::BinaryWriter w(out);
  w.bytes(std::as_bytes(std::span(kMagic)));
  w.u32(kEmbeddingFormatVersion);
  w.u32(static_cast<std::uint32_t>(matrix.dim()));
  w.u64(matrix.rows());
  w.floats(matrix.data());
}

EmbeddingMatrix read_embeddings(std::istream& in, std::string_view context) {
  io::BinaryReader r(in, std::string(context));
  std::array<char, 4> magic{};
  r.bytes(std::as_writable_bytes(std::span(magic)));
  if (magic != kMagic) throw Error(ErrorCategory::kFormat, std::string(context) + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingFormatVersion) {
    throw Error(ErrorCategory::kFormat, std::string(context) + ": unsupported FBEM version " +
                                            std::to_string(version));
  }
  const std::uint32_t dim = r.u32();
  const std::uint64_t rows = r.u64();
  if (dim == 0) throw Error(ErrorCategory::kFormat, std::string(context) + ": dim is zero");
  if (rows > (std::uint64_t{1} << 40) / dim) {
    throw Error(ErrorCategory::kFormat, std::string(context) + ": implausible row count");
  }
  std::vector<float> data(static_cast<std::size_t>(rows) * dim);
  r.floats(data);
  return EmbeddingMatrix(static_cast<std::size_t>(rows), dim, std::move(data));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
  io::write_file_atomic(path, [&](std::ostream& out) { write_embeddings(out, matrix); });
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  // Check the declared payload against the file size before allocating.
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (!ec && file_size >= kHeaderBytes) {
    std::array<char, kHeaderBytes> header{};
    in.read(header.data(), header.size());
    std::uint32_t dim = 0;
    std::uint64_t rows = 0;
    std::memcpy(&dim, header.data() + 8, 4);
    std::memcpy(&rows, header.data() + 12, 8);
    if (std::memcmp(header.data(), kMagic.data(), 4) == 0 && dim > 0 &&
        rows <= (std::uint64_t{1} << 40) / dim &&
        file_size < kHeaderBytes + rows * dim * sizeof(float)) {
      throw Error(ErrorCategory::kCorruption,
                  path.string() + ": truncated payload (" + std::to_string(file_size) +
                      " bytes, header declares " +
                      std::to_string(kHeaderBytes + rows * dim * sizeof(float)) + ")");
    }
    in.seekg(0);
  }
  EmbeddingMatrix m = read_embeddings(in, path.string());
  if (expected_rows && *expected_rows != m.rows()) {
    throw Error(ErrorCategory::kConsistency,
                path.string() + ": expected " + std::to_string(*expected_rows) + " rows, found " +
                    std::to_string(m.rows()));
  }
  return m;
}

double l2_norm(std::span<const float> v) noexcept {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

void l2_normalize_in_place(std::span<float> v, std::size_t row_index) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DegenerateError("row " + std::to_string(row_index) + " has zero norm", row_index);
  }
  for (float& x : v) x = static_cast<float>(x / n);
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& matrix) {
  EmbeddingMatrix out = matrix;
  for (std::size_t i = 0; i < out.rows(); ++i) l2_normalize_in_place(out.row(i), i);
  return out;
}

std::vector<float> synthetic_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw Error(ErrorCategory::kConfig, "synthetic embedding dim must be >= 2");
  const std::uint64_t space = detail::mix64(seed, dim);
  std::vector<double> acc(dim, 0.0);
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    add_gaussian_direction(acc, detail::mix64(space, detail::hash_text(text) ^ 0x5eedULL));
  }
  for (auto tok : tokens) add_gaussian_direction(acc, detail::mix64(space, detail::hash_text(tok)));
  double norm = 0.0;
  for (double a : acc) norm += a * a;
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

std::vector<float> random_unit_vector(std::size_t dim, std::uint64_t seed, std::uint64_t index) {
  std::vector<double> acc(dim, 0.0);
  add_gaussian_direction(acc, detail::mix64(seed, index));
  double norm = 0.0;
  for (double a : acc) norm += a * a;
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

SyntheticTextEmbedder::SyntheticTextEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim < 2) throw Error(ErrorCategory::kConfig, "synthetic embedding dim must be >= 2");
}

}  // namespace memvad
