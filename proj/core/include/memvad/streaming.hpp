#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "memvad/memory_store.hpp"
#include "memvad/retrieval.hpp"
#include "memvad/temporal.hpp"

namespace memvad {

/// Segmenting and real-time parameters. Defaults: 1 s segments, no overlap,
/// 16 sampled frames, top-10 retrieval.
struct StreamConfig {
  double t_segment = 1.0;
  double t_overlap = 0.0;
  std::size_t t_sample = 16;
  /// Frame rate the source video is assumed to have; used for frame tracks
  /// and frames-per-second throughput figures.
  double video_fps = 30.0;
  RetrievalConfig retrieval;
  SmoothingConfig smoothing;

  /// Time between consecutive segment starts, i.e. the decision budget.
  double t_decision() const noexcept { return t_segment - t_overlap; }
  /// Throws Error(kConfig) unless 0 <= t_overlap < t_segment and t_sample >= 1.
  void validate() const;
};

/// True iff t_decision <= 1 s and t_process <= t_decision.
bool meets_realtime(double t_decision, double t_process) noexcept;

/// A feature vector observed over [start_time, end_time). Frame streams use
/// one record per frame; segment streams one record per segment.
struct TimedFeature {
  double start_time = 0.0;
  double end_time = 0.0;
  std::vector<float> feature;
};

struct FrameStream {
  std::vector<TimedFeature> frames;
  /// Stream length in seconds (end of the last record).
  double duration() const noexcept;
};

/// Embedding stream file: a sequence of records, each an f64 start time, an
/// f64 end time and an FBEM block whose rows are the feature(s) for that
/// span (rows > 1 are mean-pooled).
void write_feature_stream(std::ostream& out, std::span<const TimedFeature> records);
std::vector<TimedFeature> read_feature_stream(std::istream& in);
void save_feature_stream(const std::filesystem::path& path, std::span<const TimedFeature> records);
std::vector<TimedFeature> load_feature_stream(const std::filesystem::path& path);

/// Turns the frames sampled for one segment into a segment embedding.
class SegmentEmbedder {
 public:
  virtual ~SegmentEmbedder() = default;
  /// Throws Error to mark the segment failed.
  virtual std::vector<float> embed(std::span<const TimedFeature* const> frames) const = 0;
};

/// Mean of the sampled frame features (normalisation happens in make_query).
class MeanPoolEmbedder final : public SegmentEmbedder {
 public:
  std::vector<float> embed(std::span<const TimedFeature* const> frames) const override;
};

/// Segment plan before embedding: span plus the frames it samples.
struct SegmentPlan {
  std::size_t segment_index = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  bool partial = false;
  bool merged_tail = false;
  /// Indices into FrameStream::frames, at most t_sample of them.
  std::vector<std::size_t> sampled_frames;
};

/// Segment s spans [s * t_decision, s * t_decision + t_segment). A trailing
/// remainder becomes its own partial segment if it holds at least
/// t_sample / 2 frames, otherwise it is merged into the previous segment.
/// Throws Error(kStream) for decreasing timestamps.
std::vector<SegmentPlan> plan_segments(const FrameStream& stream, const StreamConfig& config);

/// plan_segments followed by embedding; segments whose embedding fails are
/// returned in `failed` rather than as queries.
struct Segmentation {
  std::vector<SegmentQuery> queries;
  std::vector<SegmentPlan> failed;
};
Segmentation segmentize(const FrameStream& stream, const StreamConfig& config,
                        const SegmentEmbedder& embedder = MeanPoolEmbedder{});

/// Anything that turns a query into a verdict. processing_seconds on the
/// result is taken as the segment's T_process.
class SegmentScorer {
 public:
  virtual ~SegmentScorer() = default;
  virtual SegmentVerdict score(const SegmentQuery& query) = 0;
};

/// Retrieval against a memory, timed with the monotonic clock.
class MemoryScorer final : public SegmentScorer {
 public:
  MemoryScorer(const Memory& memory, RetrievalConfig config)
      : memory_(memory), config_(std::move(config)) {}
  SegmentVerdict score(const SegmentQuery& query) override {
    return score_segment(memory_, query, config_);
  }

 private:
  const Memory& memory_;
  RetrievalConfig config_;
};

enum class SegmentOutcome { kScored, kSkipped, kFailed };
std::string_view to_string(SegmentOutcome outcome) noexcept;

struct StreamVerdict {
  SegmentVerdict verdict;
  SegmentOutcome outcome = SegmentOutcome::kScored;
  bool partial = false;
  bool merged_tail = false;
  /// Time the segment's data was complete on the virtual stream clock.
  double available_at = 0.0;
  /// Virtual time the verdict was emitted (available_at for skipped ones).
  double emitted_at = 0.0;
};

struct SegmentLatency {
  std::size_t segment_index = 0;
  double t_process = 0.0;
  /// Availability-to-emission time on the virtual clock.
  double latency = 0.0;
  bool deadline_met = true;
};

struct LatencyReport {
  double t_decision = 0.0;
  std::vector<SegmentLatency> per_segment;
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  double median_t_process = 0.0;
  double p95_t_process = 0.0;
  double max_t_process = 0.0;
  /// Median of the retrieval-only portion when it differs from t_process.
  double median_retrieval = 0.0;
  /// Frames represented per segment (t_segment * video_fps) / median t_process.
  double fps = 0.0;
  /// t_decision <= 1 s and every measured t_process <= t_decision.
  bool realtime = false;
  std::size_t max_backlog = 0;
};

struct StreamResult {
  std::vector<StreamVerdict> verdicts;
  FrameScoreTrack track;
  LatencyReport report;
};

using VerdictSink = std::function<void(const StreamVerdict&)>;

/// Online loop over pre-planned segments on a virtual clock: segment s
/// becomes available when its span ends, the scorer runs one segment at a
/// time, and each measured processing time advances the clock. At most one
/// segment waits; when another arrives the waiting one is dropped (recorded
/// as skipped, carrying the last score forward). Verdicts reach `sink` in
/// segment order.
StreamResult run_stream(std::span<const SegmentQuery> queries,
                        std::span<const SegmentPlan> failed_segments, double duration,
                        const StreamConfig& config, SegmentScorer& scorer,
                        const VerdictSink& sink = {});

/// segmentize + run_stream against a memory.
StreamResult run_stream(const FrameStream& stream, const StreamConfig& config,
                        const Memory& memory, const VerdictSink& sink = {});

/// Builds a report from measured processing times (no skipping involved).
LatencyReport summarize_latency(std::span<const double> t_process, const StreamConfig& config,
                                std::span<const double> retrieval_only = {});

struct ThroughputOptions {
  std::size_t segments = 100;
  std::size_t warmup = 5;
  std::uint64_t seed = 0;
  /// Simulated encoder cost added to every segment (0 = retrieval only).
  double encoder_seconds = 0.0;
};

/// Times retrieval for a deterministic set of random unit queries.
LatencyReport measure_throughput(const Memory& memory, const StreamConfig& config,
                                 const ThroughputOptions& options = {});

/// Verdict stream line: segment index, span, score, outcome and matches.
/// Timing is deliberately absent so repeated runs produce identical bytes.
void write_verdict_jsonl(std::ostream& out, const StreamVerdict& v);
void write_latency_report(std::ostream& out, const LatencyReport& report);

}  // namespace memvad
