#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace memvad {

/// Dense N x D float32 matrix, row-major. Rows are finite.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Zero-filled rows x dim matrix.
  EmbeddingMatrix(std::size_t rows, std::size_t dim);
  /// Takes ownership of `data`; throws on size mismatch or non-finite values.
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<float> row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  /// Throws Error(kValidation) naming the first non-finite entry.
  void check_finite() const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

/// FBEM block: "FBEM", u32 version, u32 dim, u64 rows, rows*dim LE float32.
void write_embeddings(std::ostream& out, const EmbeddingMatrix& matrix);
EmbeddingMatrix read_embeddings(std::istream& in, std::string_view context = "embedding file");

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_rows = std::nullopt);

/// Unit-norm copy; a zero row raises DegenerateError with its index.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& matrix);
/// In-place variant for a single vector.
void l2_normalize_in_place(std::span<float> v, std::size_t row_index = 0);

double l2_norm(std::span<const float> v) noexcept;

/// Deterministic, hash-based text embedding for tests and demos. Each token
/// is mapped to a pseudo-random Gaussian direction seeded by (token, dim,
/// seed) and the text embedding is the normalised token sum. Texts that share
/// tokens therefore share components; nothing else about the mapping is
/// semantically meaningful.
std::vector<float> synthetic_embed(std::string_view text, std::size_t dim, std::uint64_t seed);

/// Pseudo-random unit vector drawn from (seed, index).
std::vector<float> random_unit_vector(std::size_t dim, std::uint64_t seed, std::uint64_t index);

/// Source of caption embeddings used when building a memory.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<float> embed(std::string_view text) const = 0;
};

class SyntheticTextEmbedder final : public TextEmbedder {
 public:
  SyntheticTextEmbedder(std::size_t dim, std::uint64_t seed);

  std::size_t dim() const override { return dim_; }
  std::vector<float> embed(std::string_view text) const override {
    return synthetic_embed(text, dim_, seed_);
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace memvad
