#include "memvad/temporal.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "memvad/binary_io.hpp"
#include "memvad/error.hpp"

namespace memvad {
namespace {

constexpr std::array<char, 4> kTrackMagic{'F', 'B', 'T', 'R'};
constexpr std::uint32_t kTrackVersion = 1;

/// Edge-renormalised convolution at frame t; `at(i)` returns input frame i.
template <typename Accessor>
double smooth_at(std::span<const double> kernel, std::size_t radius, std::size_t t,
                 std::size_t total, Accessor&& at) {
  double num = 0.0;
  double den = 0.0;
  const std::size_t first = t >= radius ? t - radius : 0;
  const std::size_t last = std::min(total - 1, t + radius);
  for (std::size_t i = first; i <= last; ++i) {
    const double w = kernel[i + radius - t];
    num += w * at(i);
    den += w;
  }
  return num / den;
}

}  // namespace

FrameScoreTrack aggregate_frames(std::span<const ScoredSpan> spans, double fps,
                                 std::size_t frame_count) {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw Error(ErrorCategory::kConfig, "fps must be positive");
  }
  const double duration = static_cast<double>(frame_count) / fps;
  FrameScoreTrack track;
  track.fps = fps;
  track.frame_count = frame_count;
  track.raw.assign(frame_count, 0.0);
  track.coverage.assign(frame_count, 0);

  for (std::size_t s = 0; s < spans.size(); ++s) {
    const auto& span = spans[s];
    if (!(span.start_time >= 0.0) || !(span.end_time > span.start_time) ||
        !(span.start_time < duration)) {
      throw Error(ErrorCategory::kValidation,
                  "span " + std::to_string(s) + " [" + std::to_string(span.start_time) + ", " +
                      std::to_string(span.end_time) + ") is outside the video");
    }
    if (!(span.score >= 0.0 && span.score <= 1.0)) {
      throw Error(ErrorCategory::kValidation, "span " + std::to_string(s) + " score not in [0,1]");
    }
    const double first = std::floor(span.start_time * fps);
    std::size_t t = first > 1.0 ? static_cast<std::size_t>(first) - 1 : 0;
    for (; t < frame_count; ++t) {
      const double time = static_cast<double>(t) / fps;
      if (time >= span.end_time) break;
      if (time >= span.start_time) {
        track.raw[t] += span.score;
        ++track.coverage[t];
      }
    }
  }

  std::optional<double> carried;
  for (std::size_t t = 0; t < frame_count; ++t) {
    if (track.coverage[t] > 0) {
      track.raw[t] /= track.coverage[t];
      carried = track.raw[t];
    } else {
      track.gap_frames.push_back(t);
      if (carried) track.raw[t] = *carried;
    }
  }
  // Leading gap: back-fill from the first covered frame.
  std::size_t first_covered = 0;
  while (first_covered < frame_count && track.coverage[first_covered] == 0) ++first_covered;
  if (first_covered < frame_count) {
    for (std::size_t t = 0; t < first_covered; ++t) track.raw[t] = track.raw[first_covered];
  }
  return track;
}

void SmoothingConfig::validate() const {
  if (kernel_width < 1) throw Error(ErrorCategory::kConfig, "kernel width must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCategory::kConfig, "sigma must be positive");
  }
}

double SmoothingConfig::sigma_frames() const {
  return units == SigmaUnits::kFrames ? sigma
                                      : sigma * (static_cast<double>(kernel_width) / 2.0);
}

std::vector<double> gaussian_kernel(const SmoothingConfig& config) {
  config.validate();
  const std::size_t r = config.radius();
  const double s = config.sigma_frames();
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double x = static_cast<double>(i) - static_cast<double>(r);
    k[i] = std::exp(-(x * x) / (2.0 * s * s));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

std::vector<double> gaussian_smooth(std::span<const double> values,
                                    const SmoothingConfig& config) {
  const auto kernel = gaussian_kernel(config);
  const std::size_t r = config.radius();
  std::vector<double> out(values.size());
  for (std::size_t t = 0; t < values.size(); ++t) {
    out[t] = smooth_at(kernel, r, t, values.size(), [&](std::size_t i) { return values[i]; });
  }
  return out;
}

FrameScoreTrack gaussian_smooth(const FrameScoreTrack& track, const SmoothingConfig& config) {
  FrameScoreTrack out = track;
  out.smoothed = gaussian_smooth(track.raw, config);
  return out;
}

StreamingSmoother::StreamingSmoother(const SmoothingConfig& config)
    : kernel_(gaussian_kernel(config)), radius_(config.radius()) {}

double StreamingSmoother::emit(std::size_t frame) const {
  return smooth_at(kernel_, radius_, frame, pushed_,
                   [&](std::size_t i) { return window_[i - window_start_]; });
}

std::optional<double> StreamingSmoother::push(double raw) {
  if (finished_) throw Error(ErrorCategory::kStream, "smoother already finished");
  window_.push_back(raw);
  ++pushed_;
  if (pushed_ < emitted_ + radius_ + 1) return std::nullopt;
  // Every tap to the right of `emitted_` is present, so the value is final.
  const double value = smooth_at(kernel_, radius_, emitted_, emitted_ + radius_ + 1,
                                 [&](std::size_t i) { return window_[i - window_start_]; });
  ++emitted_;
  while (window_start_ + radius_ < emitted_) {
    window_.pop_front();
    ++window_start_;
  }
  return value;
}

std::vector<double> StreamingSmoother::finish() {
  finished_ = true;
  std::vector<double> rest;
  for (; emitted_ < pushed_; ++emitted_) rest.push_back(emit(emitted_));
  return rest;
}

void write_track_jsonl(std::ostream& out, const FrameScoreTrack& track) {
  std::size_t gap_cursor = 0;
  for (std::size_t t = 0; t < track.frame_count; ++t) {
    const bool gap = gap_cursor < track.gap_frames.size() && track.gap_frames[gap_cursor] == t;
    if (gap) ++gap_cursor;
    nlohmann::ordered_json line;
    line["frame_index"] = t;
    line["time_seconds"] = static_cast<double>(t) / track.fps;
    line["raw"] = track.raw[t];
    line["smoothed"] = track.smoothed.empty() ? track.raw[t] : track.smoothed[t];
    line["coverage"] = track.coverage[t];
    line["gap"] = gap;
    out << line.dump() << '\n';
  }
}

void write_track_binary(std::ostream& out, const FrameScoreTrack& track) {
  io::BinaryWriter w(out);
  w.bytes(std::as_bytes(std::span(kTrackMagic)));
  w.u32(kTrackVersion);
  w.u32(3);
  w.u64(track.frame_count);
  w.f64(track.fps);
  for (std::size_t t = 0; t < track.frame_count; ++t) {
    w.f32(static_cast<float>(track.raw[t]));
    w.f32(static_cast<float>(track.smoothed.empty() ? track.raw[t] : track.smoothed[t]));
    w.f32(static_cast<float>(track.coverage[t]));
  }
}

FrameScoreTrack read_track_binary(std::istream& in) {
  io::BinaryReader r(in, "track file");
  std::array<char, 4> magic{};
  r.bytes(std::as_writable_bytes(std::span(magic)));
  if (magic != kTrackMagic) throw Error(ErrorCategory::kFormat, "track file: bad magic");
  if (r.u32() != kTrackVersion) throw Error(ErrorCategory::kFormat, "track file: bad version");
  if (r.u32() != 3) throw Error(ErrorCategory::kFormat, "track file: unexpected column count");
  FrameScoreTrack track;
  track.frame_count = static_cast<std::size_t>(r.u64());
  track.fps = r.f64();
  track.raw.resize(track.frame_count);
  track.smoothed.resize(track.frame_count);
  track.coverage.resize(track.frame_count);
  for (std::size_t t = 0; t < track.frame_count; ++t) {
    track.raw[t] = r.f32();
    track.smoothed[t] = r.f32();
    track.coverage[t] = static_cast<std::uint32_t>(r.f32());
    if (track.coverage[t] == 0) track.gap_frames.push_back(t);
  }
  return track;
}

std::vector<double> read_track_scores_jsonl(std::istream& in, const std::string& column) {
  if (column != "raw" && column != "smoothed") {
    throw Error(ErrorCategory::kConfig, "score column must be raw or smoothed");
  }
  std::vector<double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("track line " + std::to_string(line_no) + ": " + e.what(), line_no,
                       e.byte);
    }
    const auto it = j.find(column);
    if (it == j.end() || !it->is_number()) {
      throw Error(ErrorCategory::kValidation,
                  "track line " + std::to_string(line_no) + " has no numeric \"" + column + "\"");
    }
    scores.push_back(it->get<double>());
  }
  return scores;
}

}  // namespace memvad
