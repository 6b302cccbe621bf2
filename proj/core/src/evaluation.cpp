#include "memvad/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

namespace memvad {
namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCategory::kValidation, "scores and labels differ in length (" +
                                                std::to_string(scores.size()) + " vs " +
                                                std::to_string(labels.size()) + ")");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      throw Error(ErrorCategory::kValidation, "score at frame " + std::to_string(i) + " is NaN");
    }
    if (labels[i] > 1) {
      throw Error(ErrorCategory::kValidation, "label at frame " + std::to_string(i) + " is not 0/1");
    }
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCategory::kConfig, std::string(what) + ": '" + std::string(s) +
                                            "' is not a number");
  }
  return v;
}

std::size_t parse_count(std::string_view s, std::string_view what) {
  s = trim(s);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCategory::kConfig, std::string(what) + ": '" + std::string(s) +
                                            "' is not a non-negative integer");
  }
  return v;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<double> frame_scores(const Memory& memory, const EvalVideo& video,
                                 const StreamConfig& config, std::vector<double>& t_process,
                                 std::size_t& segments, std::size_t& failed) {
  const Segmentation seg = segmentize(video.stream, config);
  const auto batch = score_batch(memory, seg.queries, config.retrieval);

  struct Scored {
    std::size_t index;
    double start;
    double end;
    std::optional<double> score;
  };
  std::vector<Scored> all;
  for (std::size_t i = 0; i < seg.queries.size(); ++i) {
    const auto& q = seg.queries[i];
    if (batch[i].verdict) {
      all.push_back({q.segment_index, q.start_time, q.end_time, batch[i].verdict->score});
      t_process.push_back(batch[i].verdict->processing_seconds);
    } else {
      all.push_back({q.segment_index, q.start_time, q.end_time, std::nullopt});
    }
  }
  for (const auto& p : seg.failed) all.push_back({p.segment_index, p.start_time, p.end_time, {}});
  std::sort(all.begin(), all.end(),
            [](const Scored& a, const Scored& b) { return a.index < b.index; });

  const double duration =
      static_cast<double>(video.truth.frame_count) / config.video_fps;
  if (std::abs(video.stream.duration() - duration) > 1.0) {
    throw Error(ErrorCategory::kConsistency,
                "video " + video.truth.video_id + ": stream lasts " +
                    std::to_string(video.stream.duration()) + " s but " +
                    std::to_string(video.truth.frame_count) + " frames at " +
                    std::to_string(config.video_fps) + " fps last " + std::to_string(duration) +
                    " s (check --video-fps)");
  }
  std::vector<ScoredSpan> spans;
  double carried = 0.0;
  for (const auto& s : all) {
    if (s.score) {
      carried = *s.score;
    } else {
      ++failed;
    }
    ++segments;
    if (s.start >= duration) continue;
    spans.push_back({s.start, s.end, carried});
  }
  const auto track =
      gaussian_smooth(aggregate_frames(spans, config.video_fps, video.truth.frame_count),
                      config.smoothing);
  return track.smoothed;
}

StreamConfig configure_point(const Memory& memory, const StreamConfig& base, SweepParameter p,
                             const std::string& point, std::uint64_t seed,
                             std::optional<Memory>& owned) {
  StreamConfig cfg = base;
  switch (p) {
    case SweepParameter::kAlpha: {
      const double a = parse_double(point, "alpha");
      validate_alpha(a);
      cfg.retrieval.penalize = true;
      cfg.retrieval.alpha_override = static_cast<float>(a);
      break;
    }
    case SweepParameter::kTopK:
      cfg.retrieval.top_k = parse_count(point, "top_k");
      break;
    case SweepParameter::kMemorySize: {
      const std::size_t n = parse_count(point, "memory_size");
      if (n == 0 || n > memory.size()) {
        throw Error(ErrorCategory::kConfig, "memory_size " + point + " outside [1, " +
                                                std::to_string(memory.size()) + "]");
      }
      auto n_normal = static_cast<std::size_t>(
          std::llround(static_cast<double>(n) * static_cast<double>(memory.n_normal()) /
                       static_cast<double>(memory.size())));
      n_normal = std::clamp(n_normal, n > memory.n_anomalous() ? n - memory.n_anomalous() : 0,
                            std::min(n, memory.n_normal()));
      owned.emplace(memory.subset(n_normal, n - n_normal, seed));
      break;
    }
    case SweepParameter::kSegmentParams: {
      const auto parts = split(point, '/');
      if (parts.size() != 3) {
        throw Error(ErrorCategory::kConfig,
                    "segment_params '" + point + "' must be t_segment/t_overlap/t_sample");
      }
      cfg.t_segment = parse_double(parts[0], "t_segment");
      cfg.t_overlap = parse_double(parts[1], "t_overlap");
      cfg.t_sample = parse_count(parts[2], "t_sample");
      break;
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney U, kept integral so ties contribute exactly.
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = 0;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1;
      ++j;
    }
    twice_u += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    positives += pos;
    i = j;
  }
  if (positives == 0 || negatives_below == 0) {
    throw Error(ErrorCategory::kUndefinedMetric, "AUC needs both positive and negative frames");
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives_below));
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!labels[order[rank]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  if (hits == 0) throw Error(ErrorCategory::kUndefinedMetric, "AP needs at least one positive frame");
  return sum / static_cast<double>(hits);
}

GroundTruth normalize(const GroundTruth& truth) {
  GroundTruth out;
  out.video_id = truth.video_id;
  out.frame_count = truth.frame_count;
  auto intervals = truth.intervals;
  for (const auto& iv : intervals) {
    if (iv.start >= iv.end || iv.end > truth.frame_count) {
      throw Error(ErrorCategory::kValidation,
                  truth.video_id + ": interval [" + std::to_string(iv.start) + ", " +
                      std::to_string(iv.end) + ") invalid for " +
                      std::to_string(truth.frame_count) + " frames");
    }
  }
  std::sort(intervals.begin(), intervals.end(),
            [](const FrameInterval& a, const FrameInterval& b) { return a.start < b.start; });
  for (const auto& iv : intervals) {
    if (!out.intervals.empty() && iv.start < out.intervals.back().end) {
      throw Error(ErrorCategory::kValidation,
                  truth.video_id + ": intervals overlap at frame " + std::to_string(iv.start));
    }
    if (!out.intervals.empty() && iv.start == out.intervals.back().end) {
      out.intervals.back().end = iv.end;
    } else {
      out.intervals.push_back(iv);
    }
  }
  return out;
}

std::vector<std::uint8_t> intervals_to_labels(const GroundTruth& truth) {
  const GroundTruth norm = normalize(truth);
  std::vector<std::uint8_t> labels(norm.frame_count, 0);
  for (const auto& iv : norm.intervals) {
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(iv.start),
              labels.begin() + static_cast<std::ptrdiff_t>(iv.end), std::uint8_t{1});
  }
  return labels;
}

std::vector<GroundTruth> parse_ground_truth(std::istream& in) {
  std::vector<GroundTruth> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("ground truth line " + std::to_string(line_no) + ": " + e.what(), line_no,
                       e.byte);
    }
    try {
      GroundTruth gt;
      gt.video_id = j.at("video_id").get<std::string>();
      gt.frame_count = j.at("frame_count").get<std::size_t>();
      for (const auto& iv : j.at("intervals")) {
        if (!iv.is_array() || iv.size() != 2) {
          throw Error(ErrorCategory::kValidation, "interval must be [start, end]");
        }
        gt.intervals.push_back({iv[0].get<std::size_t>(), iv[1].get<std::size_t>()});
      }
      out.push_back(normalize(gt));
    } catch (const nlohmann::json::exception& e) {
      throw RecordError("ground truth line " + std::to_string(line_no) + ": " + e.what(),
                        "ground_truth", line_no - 1);
    } catch (const Error& e) {
      throw RecordError("ground truth line " + std::to_string(line_no) + ": " + e.what(),
                        "ground_truth", line_no - 1);
    }
  }
  return out;
}

std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  return parse_ground_truth(in);
}

void write_ground_truth(std::ostream& out, std::span<const GroundTruth> truths) {
  for (const auto& gt : truths) {
    nlohmann::ordered_json j;
    j["video_id"] = gt.video_id;
    j["frame_count"] = gt.frame_count;
    auto intervals = nlohmann::ordered_json::array();
    for (const auto& iv : gt.intervals) intervals.push_back({iv.start, iv.end});
    j["intervals"] = std::move(intervals);
    out << j.dump() << '\n';
  }
}

MetricSet parse_metrics(std::string_view list) {
  MetricSet m{false, false};
  for (auto name : split(list, ',')) {
    if (name == "auc") {
      m.auc = true;
    } else if (name == "ap") {
      m.ap = true;
    } else {
      throw Error(ErrorCategory::kConfig, "unknown metric '" + std::string(name) + "'");
    }
  }
  return m;
}

MetricValues compute_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                             const MetricSet& metrics) {
  MetricValues v;
  v.frames = scores.size();
  v.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (metrics.auc) v.auc = roc_auc(scores, labels);
  if (metrics.ap) v.ap = average_precision(scores, labels);
  return v;
}

EvalReport evaluate_videos(const Memory& memory, std::span<const EvalVideo> videos,
                           const StreamConfig& config, const MetricSet& metrics) {
  config.validate();
  EvalReport report;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<double> t_process;
  for (const auto& video : videos) {
    const auto s =
        frame_scores(memory, video, config, t_process, report.segments, report.failed_segments);
    const auto l = intervals_to_labels(video.truth);
    scores.insert(scores.end(), s.begin(), s.end());
    labels.insert(labels.end(), l.begin(), l.end());
  }
  report.metrics = compute_metrics(scores, labels, metrics);
  const LatencyReport latency = summarize_latency(t_process, config);
  report.median_t_process = latency.median_t_process;
  report.fps = latency.fps;
  return report;
}

SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "alpha") return SweepParameter::kAlpha;
  if (name == "top_k") return SweepParameter::kTopK;
  if (name == "memory_size") return SweepParameter::kMemorySize;
  if (name == "segment_params") return SweepParameter::kSegmentParams;
  throw Error(ErrorCategory::kConfig, "unknown sweep parameter '" + std::string(name) + "'");
}

std::string_view to_string(SweepParameter parameter) noexcept {
  switch (parameter) {
    case SweepParameter::kAlpha: return "alpha";
    case SweepParameter::kTopK: return "top_k";
    case SweepParameter::kMemorySize: return "memory_size";
    case SweepParameter::kSegmentParams: return "segment_params";
  }
  return "unknown";
}

SweepSpec parse_sweep(std::string_view text) {
  const std::size_t eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCategory::kConfig, "sweep must look like name=grid");
  }
  SweepSpec spec;
  spec.parameter = parse_sweep_parameter(trim(text.substr(0, eq)));
  const std::string_view grid = trim(text.substr(eq + 1));
  if (grid.empty()) throw Error(ErrorCategory::kConfig, "sweep grid is empty");

  if (grid.find(':') != std::string_view::npos) {
    if (spec.parameter == SweepParameter::kSegmentParams) {
      throw Error(ErrorCategory::kConfig, "segment_params takes a comma-separated list");
    }
    const auto parts = split(grid, ':');
    if (parts.size() != 3) throw Error(ErrorCategory::kConfig, "range must be start:stop:step");
    const double start = parse_double(parts[0], "range start");
    const double stop = parse_double(parts[1], "range stop");
    const double step = parse_double(parts[2], "range step");
    if (!(step > 0.0) || stop < start) {
      throw Error(ErrorCategory::kConfig, "range needs step > 0 and stop >= start");
    }
    const double span = (stop - start) / step;
    if (span > 1e6) throw Error(ErrorCategory::kConfig, "range has too many points");
    const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
      spec.points.push_back(format_number(start + static_cast<double>(i) * step));
    }
  } else {
    for (auto p : split(grid, ',')) {
      if (p.empty()) throw Error(ErrorCategory::kConfig, "sweep grid has an empty point");
      spec.points.emplace_back(p);
    }
  }
  return spec;
}

std::vector<SweepRow> run_sweep(const Memory& memory, std::span<const EvalVideo> videos,
                                const StreamConfig& base, const SweepSpec& spec,
                                const SweepOptions& options) {
  std::vector<SweepRow> rows(spec.points.size());
  const std::size_t workers =
      std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(rows.size(), 1));

  auto run_point = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.point = spec.points[i];
    try {
      std::optional<Memory> owned;
      StreamConfig cfg =
          configure_point(memory, base, spec.parameter, row.point, options.seed, owned);
      if (workers > 1) cfg.retrieval.threads = 1;
      const EvalReport r = evaluate_videos(owned ? *owned : memory, videos, cfg, options.metrics);
      row.auc = r.metrics.auc;
      row.ap = r.metrics.ap;
      row.fps = r.fps;
    } catch (const Error& e) {
      row.error_category = e.category();
      row.error = e.what();
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) run_point(i);
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return rows;
}

void write_sweep_json(std::ostream& out, const SweepSpec& spec, std::span<const SweepRow> rows) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["parameter"] = to_string(spec.parameter);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["point"] = r.point;
    row["auc"] = opt(r.auc);
    row["ap"] = opt(r.ap);
    row["fps"] = opt(r.fps);
    if (r.error_category) {
      row["error"] = {{"category", to_string(*r.error_category)}, {"message", r.error}};
    } else {
      row["error"] = nullptr;
    }
    arr.push_back(std::move(row));
  }
  j["rows"] = std::move(arr);
  out << j.dump(2) << '\n';
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  auto field = [](const std::optional<double>& v) { return v ? shortest(*v) : std::string(); };
  out << "point,auc,ap,fps,error\n";
  for (const auto& r : rows) {
    out << r.point << ',' << field(r.auc) << ',' << field(r.ap) << ',' << field(r.fps) << ','
        << (r.error_category ? std::string(to_string(*r.error_category)) : std::string()) << '\n';
  }
}

}  // namespace memvad
