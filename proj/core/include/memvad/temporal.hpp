#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <span>
#include <vector>

namespace memvad {

/// A scored half-open time span [start, end).
struct ScoredSpan {
  double start_time = 0.0;
  double end_time = 0.0;
  double score = 0.0;
};

struct FrameScoreTrack {
  double fps = 0.0;
  std::size_t frame_count = 0;
  /// Mean segment score over the segments covering each frame.
  std::vector<double> raw;
  /// Gaussian-smoothed raw; empty until gaussian_smooth runs.
  std::vector<double> smoothed;
  /// Number of segments covering each frame.
  std::vector<std::uint32_t> coverage;
  /// Frames that no segment covers; their raw score is carried over from the
  /// nearest earlier covered frame (or the first covered frame for a leading
  /// gap).
  std::vector<std::size_t> gap_frames;
};

/// Frame t belongs to a span when start <= t / fps < end.
FrameScoreTrack aggregate_frames(std::span<const ScoredSpan> spans, double fps,
                                 std::size_t frame_count);

enum class SigmaUnits {
  /// sigma_frames = sigma * (kernel_width / 2)
  kFractionOfHalfWidth,
  /// sigma is already expressed in frames
  kFrames,
};

struct SmoothingConfig {
  std::size_t kernel_width = 100;
  double sigma = 0.5;
  SigmaUnits units = SigmaUnits::kFractionOfHalfWidth;

  void validate() const;
  double sigma_frames() const;
  /// Taps on each side of the centre: (kernel_width - 1) / 2.
  std::size_t radius() const noexcept { return (kernel_width - 1) / 2; }
};

/// Symmetric discrete Gaussian with 2 * radius + 1 taps, normalised to sum 1.
std::vector<double> gaussian_kernel(const SmoothingConfig& config);

/// Convolves `values` with the kernel. Near the edges only the overlapping
/// taps are used and renormalised, so every output is a convex combination
/// of inputs.
std::vector<double> gaussian_smooth(std::span<const double> values, const SmoothingConfig& config);

/// Returns a copy of `track` with `smoothed` filled.
FrameScoreTrack gaussian_smooth(const FrameScoreTrack& track, const SmoothingConfig& config);

/// Causal counterpart of gaussian_smooth: push raw frames in order, receive
/// smoothed frames `radius()` frames later. After finish() the emitted
/// sequence equals the offline result.
class StreamingSmoother {
 public:
  explicit StreamingSmoother(const SmoothingConfig& config);

  /// Returns the smoothed value of frame (pushed - 1 - radius) once available.
  std::optional<double> push(double raw);
  /// Flushes the trailing `radius()` frames.
  std::vector<double> finish();

  std::size_t delay_frames() const noexcept { return radius_; }

 private:
  double emit(std::size_t frame) const;

  std::vector<double> kernel_;
  std::size_t radius_;
  std::deque<double> window_;
  std::size_t window_start_ = 0;  // frame index of window_.front()
  std::size_t pushed_ = 0;
  std::size_t emitted_ = 0;
  bool finished_ = false;
};

/// {"frame_index", "time_seconds", "raw", "smoothed", "coverage", "gap"} per line.
void write_track_jsonl(std::ostream& out, const FrameScoreTrack& track);
/// "FBTR", u32 version, u32 columns (3), u64 frames, f64 fps, then per frame
/// LE float32 raw, smoothed, coverage.
void write_track_binary(std::ostream& out, const FrameScoreTrack& track);
FrameScoreTrack read_track_binary(std::istream& in);

/// Reads a line-delimited track; `column` selects "raw" or "smoothed".
std::vector<double> read_track_scores_jsonl(std::istream& in, const std::string& column);

}  // namespace memvad
