#include "memvad/streaming.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include <json.hpp>

#include "memvad/binary_io.hpp"
#include "memvad/embedding.hpp"
#include "memvad/error.hpp"

namespace memvad {
namespace {

constexpr double kTimeEpsilon = 1e-9;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile_nearest_rank(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

std::vector<std::size_t> frames_in(const FrameStream& stream, double start, double end) {
  const auto& f = stream.frames;
  auto lo = std::lower_bound(f.begin(), f.end(), start,
                             [](const TimedFeature& t, double s) { return t.start_time < s; });
  std::vector<std::size_t> out;
  for (auto it = lo; it != f.end() && it->start_time < end; ++it) {
    out.push_back(static_cast<std::size_t>(it - f.begin()));
  }
  return out;
}

std::vector<std::size_t> sample_uniform(const std::vector<std::size_t>& frames, std::size_t count) {
  if (frames.size() <= count) return frames;
  std::vector<std::size_t> out(count);
  const double n = static_cast<double>(frames.size());
  for (std::size_t k = 0; k < count; ++k) {
    const auto pos = static_cast<std::size_t>((static_cast<double>(k) + 0.5) * n /
                                              static_cast<double>(count));
    out[k] = frames[std::min(pos, frames.size() - 1)];
  }
  return out;
}

/// Pending unit of work on the virtual clock.
struct Item {
  std::size_t segment_index;
  double start_time;
  double end_time;
  bool partial;
  bool merged_tail;
  const SegmentQuery* query;  // null for segments whose embedding failed
  double extra_seconds;
};

}  // namespace

void StreamConfig::validate() const {
  if (!(t_segment > 0.0) || !std::isfinite(t_segment)) {
    throw Error(ErrorCategory::kConfig, "t_segment must be positive");
  }
  if (!(t_overlap >= 0.0) || !(t_overlap < t_segment)) {
    throw Error(ErrorCategory::kConfig, "t_overlap must satisfy 0 <= t_overlap < t_segment");
  }
  if (t_sample == 0) throw Error(ErrorCategory::kConfig, "t_sample must be at least 1");
  if (!(video_fps > 0.0)) throw Error(ErrorCategory::kConfig, "video fps must be positive");
  retrieval.validate();
  smoothing.validate();
}

bool meets_realtime(double t_decision, double t_process) noexcept {
  return t_decision <= 1.0 && t_process <= t_decision;
}

double FrameStream::duration() const noexcept {
  double d = 0.0;
  for (const auto& f : frames) d = std::max(d, f.end_time);
  return d;
}

void write_feature_stream(std::ostream& out, std::span<const TimedFeature> records) {
  for (const auto& r : records) {
    io::BinaryWriter w(out);
    w.f64(r.start_time);
    w.f64(r.end_time);
    write_embeddings(out, EmbeddingMatrix(1, r.feature.size(), r.feature));
  }
}

std::vector<TimedFeature> read_feature_stream(std::istream& in) {
  std::vector<TimedFeature> records;
  std::size_t dim = 0;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::string ctx = "feature stream record " + std::to_string(records.size());
    io::BinaryReader r(in, ctx);
    TimedFeature rec;
    rec.start_time = r.f64();
    rec.end_time = r.f64();
    if (!std::isfinite(rec.start_time) || !(rec.end_time >= rec.start_time)) {
      throw Error(ErrorCategory::kFormat, ctx + ": invalid timestamps");
    }
    const EmbeddingMatrix block = read_embeddings(in, ctx);
    if (block.rows() == 0) throw Error(ErrorCategory::kFormat, ctx + ": empty block");
    if (dim == 0) dim = block.dim();
    if (block.dim() != dim) {
      throw Error(ErrorCategory::kConsistency,
                  ctx + ": dim " + std::to_string(block.dim()) + " differs from " +
                      std::to_string(dim));
    }
    rec.feature.assign(dim, 0.0f);
    for (std::size_t i = 0; i < block.rows(); ++i) {
      const auto row = block.row(i);
      for (std::size_t d = 0; d < dim; ++d) rec.feature[d] += row[d];
    }
    if (block.rows() > 1) {
      for (float& x : rec.feature) x /= static_cast<float>(block.rows());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_feature_stream(const std::filesystem::path& path,
                         std::span<const TimedFeature> records) {
  io::write_file_atomic(path, [&](std::ostream& out) { write_feature_stream(out, records); });
}

std::vector<TimedFeature> load_feature_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  return read_feature_stream(in);
}

std::vector<float> MeanPoolEmbedder::embed(std::span<const TimedFeature* const> frames) const {
  if (frames.empty()) throw Error(ErrorCategory::kStream, "segment has no frames");
  std::vector<double> acc(frames.front()->feature.size(), 0.0);
  for (const auto* f : frames) {
    if (f->feature.size() != acc.size()) {
      throw Error(ErrorCategory::kStream, "frame features disagree in dimension");
    }
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += f->feature[d];
  }
  std::vector<float> out(acc.size());
  for (std::size_t d = 0; d < acc.size(); ++d) {
    out[d] = static_cast<float>(acc[d] / static_cast<double>(frames.size()));
  }
  return out;
}

std::vector<SegmentPlan> plan_segments(const FrameStream& stream, const StreamConfig& config) {
  config.validate();
  const auto& frames = stream.frames;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].start_time < frames[i - 1].start_time) {
      throw Error(ErrorCategory::kStream,
                  "non-monotone timestamp at record " + std::to_string(i) + " (" +
                      std::to_string(frames[i].start_time) + " < " +
                      std::to_string(frames[i - 1].start_time) + ")");
    }
  }
  const double duration = stream.duration();
  const double stride = config.t_decision();
  std::vector<SegmentPlan> plans;
  if (duration <= 0.0) return plans;

  for (std::size_t s = 0;; ++s) {
    const double start = static_cast<double>(s) * stride;
    if (start + config.t_segment > duration + kTimeEpsilon) break;
    SegmentPlan p;
    p.segment_index = s;
    p.start_time = start;
    p.end_time = start + config.t_segment;
    plans.push_back(std::move(p));
  }

  const double covered = plans.empty() ? 0.0 : plans.back().end_time;
  if (duration > covered + kTimeEpsilon) {
    const double start = static_cast<double>(plans.size()) * stride;
    const auto tail_frames = frames_in(stream, start, duration);
    if (plans.empty() || 2 * tail_frames.size() >= config.t_sample) {
      SegmentPlan p;
      p.segment_index = plans.size();
      p.start_time = start;
      p.end_time = duration;
      p.partial = true;
      plans.push_back(std::move(p));
    } else {
      plans.back().end_time = duration;
      plans.back().merged_tail = true;
    }
  }

  for (auto& p : plans) {
    p.sampled_frames = sample_uniform(frames_in(stream, p.start_time, p.end_time), config.t_sample);
  }
  return plans;
}

Segmentation segmentize(const FrameStream& stream, const StreamConfig& config,
                        const SegmentEmbedder& embedder) {
  Segmentation out;
  for (auto& plan : plan_segments(stream, config)) {
    std::vector<const TimedFeature*> sampled;
    sampled.reserve(plan.sampled_frames.size());
    for (std::size_t i : plan.sampled_frames) sampled.push_back(&stream.frames[i]);
    try {
      auto q = make_query(embedder.embed(sampled), plan.start_time, plan.end_time,
                          plan.segment_index);
      q.partial = plan.partial;
      q.merged_tail = plan.merged_tail;
      out.queries.push_back(std::move(q));
    } catch (const Error&) {
      out.failed.push_back(std::move(plan));
    }
  }
  return out;
}

std::string_view to_string(SegmentOutcome outcome) noexcept {
  switch (outcome) {
    case SegmentOutcome::kScored: return "scored";
    case SegmentOutcome::kSkipped: return "skipped";
    case SegmentOutcome::kFailed: return "failed";
  }
  return "unknown";
}

namespace {

StreamResult simulate(std::vector<Item> items, double duration, const StreamConfig& config,
                      SegmentScorer& scorer, const VerdictSink& sink) {
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.segment_index < b.segment_index; });
  StreamResult result;
  std::vector<double> t_process;
  std::vector<double> retrieval_only;
  double free_at = 0.0;
  double last_score = 0.0;
  std::optional<std::size_t> queued;

  auto emit = [&](StreamVerdict v) {
    last_score = v.verdict.score;
    if (sink) sink(v);
    result.verdicts.push_back(std::move(v));
  };
  auto base_verdict = [](const Item& it, SegmentOutcome outcome, double carried) {
    StreamVerdict v;
    v.verdict.segment_index = it.segment_index;
    v.verdict.start_time = it.start_time;
    v.verdict.end_time = it.end_time;
    v.verdict.score = carried;
    v.outcome = outcome;
    v.partial = it.partial;
    v.merged_tail = it.merged_tail;
    v.available_at = it.end_time;
    return v;
  };
  auto process = [&](const Item& it) {
    const double start = std::max(free_at, it.end_time);
    if (it.query == nullptr) {
      StreamVerdict v = base_verdict(it, SegmentOutcome::kFailed, last_score);
      v.emitted_at = start;
      free_at = start;
      ++result.report.failed;
      emit(std::move(v));
      return;
    }
    StreamVerdict v = base_verdict(it, SegmentOutcome::kScored, 0.0);
    v.verdict = scorer.score(*it.query);
    const double d = v.verdict.processing_seconds + it.extra_seconds;
    free_at = start + d;
    v.emitted_at = free_at;
    t_process.push_back(d);
    retrieval_only.push_back(v.verdict.processing_seconds);
    result.report.per_segment.push_back(
        {it.segment_index, d, free_at - it.end_time, d <= config.t_decision()});
    ++result.report.processed;
    emit(std::move(v));
  };

  for (std::size_t i = 0; i < items.size(); ++i) {
    const double arrival = items[i].end_time;
    if (queued && free_at <= arrival) {
      process(items[*queued]);
      queued.reset();
    }
    if (!queued && free_at <= arrival) {
      process(items[i]);
      continue;
    }
    if (queued) {
      StreamVerdict v = base_verdict(items[*queued], SegmentOutcome::kSkipped, last_score);
      v.emitted_at = arrival;
      ++result.report.skipped;
      emit(std::move(v));
    }
    queued = i;
    result.report.max_backlog = std::max<std::size_t>(result.report.max_backlog, 1);
  }
  if (queued) process(items[*queued]);

  LatencyReport summary = summarize_latency(t_process, config, retrieval_only);
  summary.per_segment = std::move(result.report.per_segment);
  summary.processed = result.report.processed;
  summary.skipped = result.report.skipped;
  summary.failed = result.report.failed;
  summary.max_backlog = result.report.max_backlog;
  result.report = std::move(summary);

  std::vector<ScoredSpan> spans;
  spans.reserve(result.verdicts.size());
  for (const auto& v : result.verdicts) {
    spans.push_back({v.verdict.start_time, v.verdict.end_time, v.verdict.score});
  }
  const auto frame_count =
      static_cast<std::size_t>(std::floor(duration * config.video_fps + 0.5));
  result.track = gaussian_smooth(aggregate_frames(spans, config.video_fps, frame_count),
                                 config.smoothing);
  return result;
}

}  // namespace

StreamResult run_stream(std::span<const SegmentQuery> queries,
                        std::span<const SegmentPlan> failed_segments, double duration,
                        const StreamConfig& config, SegmentScorer& scorer,
                        const VerdictSink& sink) {
  config.validate();
  std::vector<Item> items;
  items.reserve(queries.size() + failed_segments.size());
  for (const auto& q : queries) {
    items.push_back({q.segment_index, q.start_time, q.end_time, q.partial, q.merged_tail, &q, 0.0});
  }
  for (const auto& p : failed_segments) {
    items.push_back(
        {p.segment_index, p.start_time, p.end_time, p.partial, p.merged_tail, nullptr, 0.0});
  }
  return simulate(std::move(items), duration, config, scorer, sink);
}

StreamResult run_stream(const FrameStream& stream, const StreamConfig& config,
                        const Memory& memory, const VerdictSink& sink) {
  config.validate();
  // Embed per segment so that encoder time is charged to each segment.
  const MeanPoolEmbedder embedder;
  std::vector<SegmentQuery> queries;
  std::vector<double> embed_seconds;
  std::vector<SegmentPlan> failed;
  for (auto& plan : plan_segments(stream, config)) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<const TimedFeature*> sampled;
    for (std::size_t i : plan.sampled_frames) sampled.push_back(&stream.frames[i]);
    try {
      auto q = make_query(embedder.embed(sampled), plan.start_time, plan.end_time,
                          plan.segment_index);
      q.partial = plan.partial;
      q.merged_tail = plan.merged_tail;
      queries.push_back(std::move(q));
      embed_seconds.push_back(seconds_since(t0));
    } catch (const Error&) {
      failed.push_back(std::move(plan));
    }
  }
  std::vector<Item> items;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    items.push_back(
        {q.segment_index, q.start_time, q.end_time, q.partial, q.merged_tail, &q, embed_seconds[i]});
  }
  for (const auto& p : failed) {
    items.push_back(
        {p.segment_index, p.start_time, p.end_time, p.partial, p.merged_tail, nullptr, 0.0});
  }
  MemoryScorer scorer(memory, config.retrieval);
  return simulate(std::move(items), stream.duration(), config, scorer, sink);
}

LatencyReport summarize_latency(std::span<const double> t_process, const StreamConfig& config,
                                std::span<const double> retrieval_only) {
  LatencyReport r;
  r.t_decision = config.t_decision();
  std::vector<double> times(t_process.begin(), t_process.end());
  r.median_t_process = median_of(times);
  r.p95_t_process = percentile_nearest_rank(times, 0.95);
  r.max_t_process = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
  r.median_retrieval = retrieval_only.empty()
                           ? r.median_t_process
                           : median_of({retrieval_only.begin(), retrieval_only.end()});
  const double frames_per_segment = config.t_segment * config.video_fps;
  r.fps = r.median_t_process > 0.0 ? frames_per_segment / r.median_t_process : 0.0;
  r.realtime = std::all_of(times.begin(), times.end(), [&](double t) {
    return meets_realtime(r.t_decision, t);
  }) && r.t_decision <= 1.0;
  r.processed = times.size();
  for (std::size_t i = 0; i < times.size(); ++i) {
    r.per_segment.push_back({i, times[i], times[i], times[i] <= r.t_decision});
  }
  return r;
}

LatencyReport measure_throughput(const Memory& memory, const StreamConfig& config,
                                 const ThroughputOptions& options) {
  config.validate();
  const std::size_t total = options.warmup + options.segments;
  std::vector<SegmentQuery> queries;
  queries.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const double start = static_cast<double>(i) * config.t_decision();
    queries.push_back(make_query(random_unit_vector(memory.dim(), options.seed, i), start,
                                 start + config.t_segment, i));
  }
  std::vector<double> retrieval;
  std::vector<double> t_process;
  for (std::size_t i = 0; i < total; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto v = score_segment(memory, queries[i], config.retrieval);
    const double elapsed = seconds_since(t0);
    if (i < options.warmup) continue;
    (void)v;
    retrieval.push_back(elapsed);
    t_process.push_back(elapsed + options.encoder_seconds);
  }
  return summarize_latency(t_process, config, retrieval);
}

void write_verdict_jsonl(std::ostream& out, const StreamVerdict& v) {
  nlohmann::ordered_json j;
  j["segment_index"] = v.verdict.segment_index;
  j["start_time"] = v.verdict.start_time;
  j["end_time"] = v.verdict.end_time;
  j["score"] = v.verdict.score;
  j["outcome"] = to_string(v.outcome);
  if (v.partial) j["partial"] = true;
  if (v.merged_tail) j["merged_tail"] = true;
  auto matches = nlohmann::ordered_json::array();
  for (const auto& m : v.verdict.matches) {
    nlohmann::ordered_json mj;
    mj["caption_index"] = m.caption_index;
    mj["weight"] = m.weight;
    mj["flag"] = static_cast<int>(m.flag);
    mj["category"] = m.category;
    mj["text"] = m.text;
    mj["similarity"] = m.similarity;
    matches.push_back(std::move(mj));
  }
  j["matches"] = std::move(matches);
  out << j.dump() << '\n';
}

void write_latency_report(std::ostream& out, const LatencyReport& report) {
  nlohmann::ordered_json j;
  j["t_decision"] = report.t_decision;
  j["realtime"] = report.realtime;
  j["processed"] = report.processed;
  j["skipped"] = report.skipped;
  j["failed"] = report.failed;
  j["max_backlog"] = report.max_backlog;
  j["median_t_process"] = report.median_t_process;
  j["p95_t_process"] = report.p95_t_process;
  j["max_t_process"] = report.max_t_process;
  j["median_retrieval"] = report.median_retrieval;
  j["fps"] = report.fps;
  auto per = nlohmann::ordered_json::array();
  for (const auto& s : report.per_segment) {
    per.push_back({{"segment_index", s.segment_index},
                   {"t_process", s.t_process},
                   {"latency", s.latency},
                   {"deadline_met", s.deadline_met}});
  }
  j["per_segment"] = std::move(per);
  out << j.dump(2) << '\n';
}

}  // namespace memvad
