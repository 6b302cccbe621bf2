#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "memvad/corpus.hpp"
#include "memvad/embedding.hpp"

namespace memvad {

struct CaptionRecord {
  std::string text;
  std::string category;
  Flag flag = Flag::kNormal;
  std::size_t corpus_index = 0;

  friend bool operator==(const CaptionRecord&, const CaptionRecord&) = default;
};

inline constexpr float kDefaultAlpha = 0.95f;
inline constexpr std::uint32_t kMemoryFormatVersion = 1;

/// Immutable pseudo-scene memory: N = N_N + N_A unit-norm caption rows,
/// normals first. The anomaly penalty alpha is metadata applied at query
/// time as a multiplier on anomalous-row similarities.
///
/// Non-copyable (payloads reach several GiB); use clone() or subset() for
/// derived views.
class Memory {
 public:
  /// Validates every invariant: counts agree, flags sorted and consistent
  /// with n_normal, rows unit-norm within 1e-5, alpha in (0, 1].
  static Memory from_parts(std::vector<CaptionRecord> captions, EmbeddingMatrix embeddings,
                           std::size_t n_normal, float alpha);

  Memory(Memory&&) noexcept = default;
  Memory& operator=(Memory&&) noexcept = default;
  Memory(const Memory&) = delete;
  Memory& operator=(const Memory&) = delete;

  std::size_t size() const noexcept { return captions_.size(); }
  std::size_t dim() const noexcept { return embeddings_.dim(); }
  std::size_t n_normal() const noexcept { return n_normal_; }
  std::size_t n_anomalous() const noexcept { return size() - n_normal_; }
  float alpha() const noexcept { return alpha_; }
  bool normalized() const noexcept { return true; }

  const std::vector<CaptionRecord>& captions() const noexcept { return captions_; }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }
  std::span<const float> row(std::size_t i) const noexcept { return embeddings_.row(i); }
  Flag flag(std::size_t i) const noexcept {
    return i < n_normal_ ? Flag::kNormal : Flag::kAnomalous;
  }
  std::vector<std::uint8_t> flags() const;

  Memory clone() const;
  /// Copy with a different alpha.
  Memory with_alpha(float alpha) const;
  /// Copy keeping `n_normal` normals and `n_anomalous` anomalies drawn
  /// without replacement by a seeded shuffle (order within each class kept).
  Memory subset(std::size_t n_normal, std::size_t n_anomalous, std::uint64_t seed) const;

  /// Raw payload size of the embedding matrix in bytes.
  std::uint64_t payload_bytes() const noexcept {
    return static_cast<std::uint64_t>(size()) * dim() * sizeof(float);
  }

  friend bool operator==(const Memory& a, const Memory& b) {
    return a.n_normal_ == b.n_normal_ && a.alpha_ == b.alpha_ && a.captions_ == b.captions_ &&
           a.embeddings_ == b.embeddings_;
  }

 private:
  Memory() = default;

  std::vector<CaptionRecord> captions_;
  EmbeddingMatrix embeddings_;
  std::size_t n_normal_ = 0;
  float alpha_ = kDefaultAlpha;
};

/// Throws Error(kConfig) unless alpha is in (0, 1].
void validate_alpha(double alpha);

/// Embeds every caption (normals then anomalies) with `embedder` and
/// normalises the rows.
Memory build_memory(const Corpus& corpus, const TextEmbedder& embedder,
                    float alpha = kDefaultAlpha);
/// Uses precomputed embeddings; row i must belong to caption i.
Memory build_memory(const Corpus& corpus, const EmbeddingMatrix& caption_embeddings,
                    float alpha = kDefaultAlpha);

/// FBSM layout: "FBSM", u32 version, u32 dim, u64 n_normal, u64 n_anomalous,
/// f32 alpha, u8 normalized, caption table (per record: u32-prefixed text,
/// u32-prefixed category, u8 flag), one FBEM block, trailing u64 FNV-1a
/// checksum of every preceding byte.
void save_memory(const Memory& memory, const std::filesystem::path& path);
Memory load_memory(const std::filesystem::path& path);

/// Angle in degrees between the normal and anomalous row centroids.
double centroid_angle(const Memory& memory);
/// Same quantity for an arbitrary matrix split at `n_normal`.
double centroid_angle(const EmbeddingMatrix& rows, std::size_t n_normal);

}  // namespace memvad
