#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memvad/error.hpp"
#include "memvad/memory_store.hpp"
#include "memvad/streaming.hpp"

namespace memvad {

/// Mann-Whitney AUC: P(pos > neg) + 0.5 * P(pos == neg), computed exactly by
/// sorting and counting tied groups. Throws Error(kUndefinedMetric) unless
/// both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Non-interpolated AP: mean of precision at each positive's rank, ranks by
/// descending score with ties broken by ascending frame index. Throws
/// Error(kUndefinedMetric) when there are no positives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Half-open frame interval [start, end).
struct FrameInterval {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

struct GroundTruth {
  std::string video_id;
  std::size_t frame_count = 0;
  std::vector<FrameInterval> intervals;
};

/// Sorted, adjacent intervals merged. Throws Error(kValidation) for empty or
/// out-of-range intervals and for overlaps.
GroundTruth normalize(const GroundTruth& truth);

/// 1 inside the (normalised) intervals, 0 elsewhere.
std::vector<std::uint8_t> intervals_to_labels(const GroundTruth& truth);

/// One {"video_id", "frame_count", "intervals": [[s, e], ...]} object per line.
std::vector<GroundTruth> parse_ground_truth(std::istream& in);
std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path);
void write_ground_truth(std::ostream& out, std::span<const GroundTruth> truths);

struct MetricSet {
  bool auc = true;
  bool ap = true;
};

/// Parses a comma-separated list such as "auc,ap".
MetricSet parse_metrics(std::string_view list);

struct MetricValues {
  std::optional<double> auc;
  std::optional<double> ap;
  std::size_t frames = 0;
  std::size_t positives = 0;
};

MetricValues compute_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                             const MetricSet& metrics);

/// A frame-feature stream paired with its frame labels.
struct EvalVideo {
  FrameStream stream;
  GroundTruth truth;
};

struct EvalReport {
  MetricValues metrics;
  /// Frames per second at the median per-segment processing time.
  double fps = 0.0;
  double median_t_process = 0.0;
  std::size_t segments = 0;
  std::size_t failed_segments = 0;
};

/// Scores every video (no real-time skipping, so results depend only on the
/// inputs), builds smoothed frame tracks of length truth.frame_count and
/// evaluates the metrics over all frames concatenated. `threads` parallelises
/// the per-query scoring.
EvalReport evaluate_videos(const Memory& memory, std::span<const EvalVideo> videos,
                           const StreamConfig& config, const MetricSet& metrics = {});

enum class SweepParameter { kAlpha, kTopK, kMemorySize, kSegmentParams };

SweepParameter parse_sweep_parameter(std::string_view name);
std::string_view to_string(SweepParameter parameter) noexcept;

struct SweepSpec {
  SweepParameter parameter = SweepParameter::kAlpha;
  /// Grid points as text; each is parsed and validated when its row runs.
  std::vector<std::string> points;
};

/// "alpha=0.80:1.00:0.01", "top_k=1,5,10,20,40", "memory_size=1000,5000" or
/// "segment_params=1/0/16,2/1/16" (t_segment/t_overlap/t_sample). A range
/// start:stop:step includes stop when it lies on the grid.
SweepSpec parse_sweep(std::string_view text);

struct SweepRow {
  std::string point;
  std::optional<double> auc;
  std::optional<double> ap;
  std::optional<double> fps;
  std::optional<ErrorCategory> error_category;
  std::string error;
};

struct SweepOptions {
  MetricSet metrics;
  /// Seed for memory_size subsets.
  std::uint64_t seed = 0;
  /// Grid points evaluated concurrently.
  std::size_t threads = 1;
};

/// One row per grid point; a point that fails validation or evaluation gets
/// an error row and the sweep continues.
std::vector<SweepRow> run_sweep(const Memory& memory, std::span<const EvalVideo> videos,
                                const StreamConfig& base, const SweepSpec& spec,
                                const SweepOptions& options = {});

/// {"parameter": ..., "rows": [...]} with null for absent values.
void write_sweep_json(std::ostream& out, const SweepSpec& spec, std::span<const SweepRow> rows);
/// Plot-ready series: header "point,auc,ap,fps,error".
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace memvad
