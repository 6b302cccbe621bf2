#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memvad/error.hpp"
#include "memvad/memory_store.hpp"

namespace memvad {

/// One segment's unit-norm embedding and its half-open time span.
struct SegmentQuery {
  std::vector<float> embedding;
  double start_time = 0.0;
  double end_time = 0.0;
  std::size_t segment_index = 0;
  /// Final segment shorter than t_segment.
  bool partial = false;
  /// The span was extended to absorb a too-short tail.
  bool merged_tail = false;
};

/// Normalises `embedding` and wraps it; throws DegenerateError on a zero
/// vector.
SegmentQuery make_query(std::vector<float> embedding, double start_time, double end_time,
                        std::size_t segment_index);

struct RankedIndex {
  std::size_t index = 0;
  float similarity = 0.0f;

  friend bool operator==(const RankedIndex&, const RankedIndex&) = default;
};

/// Retrieved caption with its softmax weight; the caption is the textual
/// explanation of the segment.
struct Match {
  std::size_t caption_index = 0;
  double weight = 0.0;
  Flag flag = Flag::kNormal;
  std::string text;
  std::string category;
  float similarity = 0.0f;

  friend bool operator==(const Match&, const Match&) = default;
};

struct SegmentVerdict {
  std::size_t segment_index = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  /// Softmax-weighted mean of the retrieved flags, in [0, 1].
  double score = 0.0;
  std::vector<Match> matches;
  /// Wall time spent in score_segment; telemetry only, excluded from ==.
  double processing_seconds = 0.0;

  friend bool operator==(const SegmentVerdict& a, const SegmentVerdict& b) {
    return a.segment_index == b.segment_index && a.start_time == b.start_time &&
           a.end_time == b.end_time && a.score == b.score && a.matches == b.matches;
  }
};

inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr double kDefaultTemperature = 1.0;

struct RetrievalConfig {
  std::size_t top_k = kDefaultTopK;
  double temperature = kDefaultTemperature;
  /// false disables the anomaly penalty entirely (ablation baseline).
  bool penalize = true;
  /// Replaces the memory's stored alpha, e.g. for sweeps.
  std::optional<float> alpha_override;
  /// Workers used to partition the memory scan of a single query, or the
  /// queries of a batch. 1 selects the sequential reference path.
  std::size_t threads = 1;

  void validate() const;
  float effective_alpha(const Memory& memory) const;
};

/// sigma_j = q . t_j for normal rows, alpha * (q . t_j) for anomalous rows.
std::vector<float> penalized_similarities(const Memory& memory, std::span<const float> query,
                                          const RetrievalConfig& config = {});

/// The min(top_k, N) largest similarities ordered by (similarity desc,
/// index asc). Ties resolve to the lower index.
std::vector<RankedIndex> top_k_select(std::span<const float> similarities, std::size_t top_k);

/// Fused scan + selection without materialising the similarity vector. With
/// config.threads > 1 the rows are partitioned and per-partition results are
/// merged under the same ordering, so the output equals the sequential one.
std::vector<RankedIndex> retrieve_top_k(const Memory& memory, std::span<const float> query,
                                        const RetrievalConfig& config);

/// softmax(similarity / temperature) over the ranked list.
std::vector<double> softmax_weights(std::span<const RankedIndex> ranked, double temperature);

SegmentVerdict score_segment(const Memory& memory, const SegmentQuery& query,
                             const RetrievalConfig& config = {});

struct BatchEntry {
  std::optional<SegmentVerdict> verdict;
  std::optional<Error> error;
};

/// Order-preserving batch scoring. Per-query failures are reported in place
/// unless `fail_fast`, in which case the first failure (by index) is thrown.
std::vector<BatchEntry> score_batch(const Memory& memory, std::span<const SegmentQuery> queries,
                                    const RetrievalConfig& config = {}, bool fail_fast = false);

/// Single dot product used by every scan path.
float dot_product(std::span<const float> a, std::span<const float> b) noexcept;

}  // namespace memvad
