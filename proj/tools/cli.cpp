#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memvad/binary_io.hpp"
#include "memvad/corpus.hpp"
#include "memvad/embedding.hpp"
#include "memvad/evaluation.hpp"
#include "memvad/memory_store.hpp"
#include "memvad/retrieval.hpp"
#include "memvad/streaming.hpp"
#include "memvad/synthetic.hpp"
#include "memvad/temporal.hpp"

namespace memvad::cli {
namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

/// Line-delimited JSON log records on the error stream.
class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet), started_(Clock::now()) {}

  void info(std::string_view event, Json fields = Json::object()) { write("info", event, fields); }
  void warn(std::string_view event, Json fields = Json::object()) { write("warn", event, fields); }

  /// Runs `fn` and logs its wall time under `stage`.
  template <typename Fn>
  auto stage(std::string_view stage, Fn&& fn) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      info("stage", {{"stage", stage}, {"seconds", elapsed(t0)}});
    } else {
      auto result = fn();
      info("stage", {{"stage", stage}, {"seconds", elapsed(t0)}});
      return result;
    }
  }

 private:
  static double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  }

  void write(std::string_view level, std::string_view event, const Json& fields) {
    if (quiet_) return;
    Json line;
    line["level"] = level;
    line["event"] = event;
    line["t"] = elapsed(started_);
    for (const auto& [k, v] : fields.items()) line[k] = v;
    err_ << line.dump() << '\n';
  }

  std::ostream& err_;
  bool quiet_;
  Clock::time_point started_;
};

struct RetrievalOpts {
  std::size_t top_k = kDefaultTopK;
  double temperature = kDefaultTemperature;
  double alpha = 0.0;
  CLI::Option* alpha_opt = nullptr;
  bool no_penalty = false;
  std::size_t threads = 1;
};

struct SegmentOpts {
  double t_segment = 1.0;
  double t_overlap = 0.0;
  std::size_t t_sample = 16;
  double video_fps = 30.0;
  std::size_t kernel_width = 100;
  double sigma = 0.5;
  bool sigma_in_frames = false;
};

void add_retrieval_options(CLI::App* app, RetrievalOpts& o) {
  app->add_option("--top-k", o.top_k, "Captions retrieved per segment")->capture_default_str();
  app->add_option("--temperature", o.temperature, "Softmax temperature")->capture_default_str();
  o.alpha_opt = app->add_option("--alpha", o.alpha, "Override the memory's anomaly scale");
  app->add_flag("--no-penalty", o.no_penalty, "Disable the anomaly scale entirely");
  app->add_option("--threads", o.threads, "Worker threads (1 = reference path)")
      ->capture_default_str();
}

void add_segment_options(CLI::App* app, SegmentOpts& o) {
  app->add_option("--t-segment", o.t_segment, "Segment length in seconds")->capture_default_str();
  app->add_option("--t-overlap", o.t_overlap, "Segment overlap in seconds")->capture_default_str();
  app->add_option("--t-sample", o.t_sample, "Frames sampled per segment")->capture_default_str();
  app->add_option("--video-fps", o.video_fps, "Frame rate of the source video")
      ->capture_default_str();
  app->add_option("--kernel-width", o.kernel_width, "Smoothing kernel width in frames")
      ->capture_default_str();
  app->add_option("--sigma", o.sigma, "Smoothing sigma (fraction of half width)")
      ->capture_default_str();
  app->add_flag("--sigma-frames", o.sigma_in_frames, "Interpret --sigma in frames");
}

StreamConfig make_config(const RetrievalOpts& r, const SegmentOpts& s) {
  StreamConfig c;
  c.t_segment = s.t_segment;
  c.t_overlap = s.t_overlap;
  c.t_sample = s.t_sample;
  c.video_fps = s.video_fps;
  c.smoothing.kernel_width = s.kernel_width;
  c.smoothing.sigma = s.sigma;
  c.smoothing.units = s.sigma_in_frames ? SigmaUnits::kFrames : SigmaUnits::kFractionOfHalfWidth;
  c.retrieval.top_k = r.top_k;
  c.retrieval.temperature = r.temperature;
  c.retrieval.penalize = !r.no_penalty;
  c.retrieval.threads = r.threads;
  if (r.alpha_opt != nullptr && r.alpha_opt->count() > 0) {
    validate_alpha(r.alpha);
    c.retrieval.alpha_override = static_cast<float>(r.alpha);
  }
  c.validate();
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  io::write_file_atomic(path, [&](std::ostream& o) { o << body; });
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::size_t frames_for(double duration, double fps) {
  return static_cast<std::size_t>(std::floor(duration * fps + 0.5));
}

std::string video_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "video_%03zu.fbfs", i);
  return buf;
}

std::vector<EvalVideo> load_videos(const std::vector<std::string>& frames,
                                   const std::string& ground_truth) {
  auto truths = load_ground_truth(ground_truth);
  if (truths.size() != frames.size()) {
    throw Error(ErrorCategory::kConsistency,
                std::to_string(frames.size()) + " frame streams but " +
                    std::to_string(truths.size()) + " ground-truth records");
  }
  std::vector<EvalVideo> videos(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    videos[i].stream.frames = load_feature_stream(frames[i]);
    videos[i].truth = std::move(truths[i]);
  }
  return videos;
}

// ---------------------------------------------------------------- commands

struct BuildMemoryArgs {
  std::string captions;
  std::size_t sample = 0;
  std::uint64_t seed = 0;
  std::string embeddings;
  std::size_t dim = 256;
  std::uint64_t embed_seed = 0;
  std::string prompt_mode = "full";
  std::string templates;
  double alpha = kDefaultAlpha;
  bool dedup = false;
  std::string out;
};

int cmd_build_memory(const BuildMemoryArgs& a, std::ostream& out, Log& log) {
  validate_alpha(a.alpha);
  const PromptMode mode = parse_prompt_mode(a.prompt_mode);
  if (a.captions.empty() == (a.sample == 0)) {
    throw Error(ErrorCategory::kConfig, "give exactly one of --captions or --sample");
  }
  Corpus corpus = log.stage("load_corpus", [&] {
    return a.captions.empty() ? generate_sample_corpus(a.sample, a.seed)
                              : parse_corpus(io::read_text_file(a.captions));
  });
  if (a.dedup) corpus = deduplicate(corpus);
  const TemplateSet templates =
      a.templates.empty() ? TemplateSet{} : load_templates(io::read_text_file(a.templates));
  const Corpus templated = apply_repulsive_prompting(corpus, templates, mode);
  const auto violations = check_keyword_exclusivity(templated, templates, mode);
  for (const auto& v : violations) log.warn("keyword_violation", {{"row", v.row}, {"reason", v.reason}});

  Memory memory = log.stage("embed", [&] {
    if (!a.embeddings.empty()) {
      return build_memory(templated, load_embeddings(a.embeddings, templated.size()),
                          static_cast<float>(a.alpha));
    }
    return build_memory(templated, SyntheticTextEmbedder(a.dim, a.embed_seed),
                        static_cast<float>(a.alpha));
  });
  log.stage("save", [&] { save_memory(memory, a.out); });

  Json summary;
  summary["out"] = a.out;
  summary["rows"] = memory.size();
  summary["n_normal"] = memory.n_normal();
  summary["n_anomalous"] = memory.n_anomalous();
  summary["dim"] = memory.dim();
  summary["alpha"] = memory.alpha();
  summary["prompt_mode"] = to_string(mode);
  try {
    summary["centroid_angle_deg"] = centroid_angle(memory);
  } catch (const DegenerateError&) {
    summary["centroid_angle_deg"] = nullptr;
  }
  summary["keyword_violations"] = violations.size();
  out << summary.dump() << '\n';
  return kExitOk;
}

struct GenCorpusArgs {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_corpus(const GenCorpusArgs& a, std::ostream& out, Log& log) {
  const Corpus corpus = generate_sample_corpus(a.count, a.seed);
  write_text(a.out, serialize_corpus(corpus));
  log.info("corpus_written", {{"out", a.out}, {"rows", corpus.size()}});
  out << Json{{"out", a.out}, {"rows", corpus.size()}}.dump() << '\n';
  return kExitOk;
}

struct ScoreArgs {
  std::string memory;
  std::string stream;
  std::string verdicts;
  std::string track;
  std::string track_format = "jsonl";
  RetrievalOpts retrieval;
  SegmentOpts segment;
};

void write_track(const std::string& path, const std::string& format, const FrameScoreTrack& t) {
  if (format == "jsonl") {
    io::write_file_atomic(path, [&](std::ostream& o) { write_track_jsonl(o, t); });
  } else if (format == "binary") {
    io::write_file_atomic(path, [&](std::ostream& o) { write_track_binary(o, t); });
  } else {
    throw Error(ErrorCategory::kConfig, "track format must be jsonl or binary");
  }
}

int cmd_score(const ScoreArgs& a, std::ostream& out, Log& log) {
  const StreamConfig cfg = make_config(a.retrieval, a.segment);
  if (a.track_format != "jsonl" && a.track_format != "binary") {
    throw Error(ErrorCategory::kConfig, "track format must be jsonl or binary");
  }
  const Memory memory = log.stage("load_memory", [&] { return load_memory(a.memory); });
  const auto records = log.stage("load_stream", [&] { return load_feature_stream(a.stream); });

  std::vector<SegmentQuery> queries;
  std::vector<std::optional<std::size_t>> query_of(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      queries.push_back(make_query(records[i].feature, records[i].start_time,
                                   records[i].end_time, i));
      query_of[i] = queries.size() - 1;
    } catch (const Error& e) {
      log.warn("segment_failed", {{"segment_index", i}, {"reason", e.what()}});
    }
  }
  const auto batch = log.stage("retrieve", [&] { return score_batch(memory, queries, cfg.retrieval); });

  std::ostringstream verdict_text;
  std::vector<ScoredSpan> spans;
  double carried = 0.0;
  double duration = 0.0;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    StreamVerdict v;
    v.verdict.segment_index = i;
    v.verdict.start_time = records[i].start_time;
    v.verdict.end_time = records[i].end_time;
    const BatchEntry* entry = query_of[i] ? &batch[*query_of[i]] : nullptr;
    if (entry != nullptr && entry->verdict) {
      v.verdict = *entry->verdict;
      carried = v.verdict.score;
    } else {
      if (entry != nullptr && entry->error) {
        log.warn("segment_failed", {{"segment_index", i}, {"reason", entry->error->what()}});
      }
      v.outcome = SegmentOutcome::kFailed;
      v.verdict.score = carried;
      ++failed;
    }
    write_verdict_jsonl(verdict_text, v);
    if (v.verdict.end_time > v.verdict.start_time) {
      spans.push_back({v.verdict.start_time, v.verdict.end_time, v.verdict.score});
    }
    duration = std::max(duration, records[i].end_time);
  }
  const FrameScoreTrack track = log.stage("refine", [&] {
    return gaussian_smooth(aggregate_frames(spans, cfg.video_fps, frames_for(duration, cfg.video_fps)),
                           cfg.smoothing);
  });

  write_text(a.verdicts, verdict_text.str());
  write_track(a.track, a.track_format, track);
  out << Json{{"segments", records.size()},
              {"failed", failed},
              {"frames", track.frame_count},
              {"verdicts", a.verdicts},
              {"track", a.track}}
             .dump()
      << '\n';
  return kExitOk;
}

struct StreamArgs {
  std::string memory;
  std::string frames;
  std::string verdicts;
  std::string track;
  std::string track_format = "jsonl";
  std::string report;
  RetrievalOpts retrieval;
  SegmentOpts segment;
};

Json report_summary(const LatencyReport& r) {
  return Json{{"realtime", r.realtime},
              {"t_decision", r.t_decision},
              {"median_t_process", r.median_t_process},
              {"p95_t_process", r.p95_t_process},
              {"fps", r.fps},
              {"processed", r.processed},
              {"skipped", r.skipped},
              {"failed", r.failed}};
}

int cmd_stream(const StreamArgs& a, std::ostream& out, Log& log) {
  const StreamConfig cfg = make_config(a.retrieval, a.segment);
  const Memory memory = log.stage("load_memory", [&] { return load_memory(a.memory); });
  FrameStream stream;
  stream.frames = log.stage("load_frames", [&] { return load_feature_stream(a.frames); });

  std::ostringstream buffered;
  const bool live = a.verdicts.empty();
  const auto result = run_stream(stream, cfg, memory, [&](const StreamVerdict& v) {
    write_verdict_jsonl(live ? out : static_cast<std::ostream&>(buffered), v);
    if (live) out.flush();
  });
  if (!live) write_text(a.verdicts, buffered.str());
  if (!a.track.empty()) write_track(a.track, a.track_format, result.track);
  if (!a.report.empty()) {
    io::write_file_atomic(a.report, [&](std::ostream& o) { write_latency_report(o, result.report); });
  }
  log.info("latency", report_summary(result.report));
  if (!live) out << report_summary(result.report).dump() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::vector<std::string> scores;
  std::string column = "smoothed";
  std::string memory;
  std::vector<std::string> frames;
  std::string ground_truth;
  std::string metrics = "auc,ap";
  std::string out;
  RetrievalOpts retrieval;
  SegmentOpts segment;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, Log& log) {
  const MetricSet metrics = parse_metrics(a.metrics);
  Json result;
  if (!a.scores.empty()) {
    if (!a.memory.empty() || !a.frames.empty()) {
      throw Error(ErrorCategory::kConfig, "--scores cannot be combined with --memory/--frames");
    }
    const auto truths = load_ground_truth(a.ground_truth);
    if (truths.size() != a.scores.size()) {
      throw Error(ErrorCategory::kConsistency,
                  std::to_string(a.scores.size()) + " score tracks but " +
                      std::to_string(truths.size()) + " ground-truth records");
    }
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      std::ifstream in(a.scores[i]);
      if (!in) throw Error(ErrorCategory::kIo, "cannot open " + a.scores[i]);
      const auto s = read_track_scores_jsonl(in, a.column);
      if (s.size() != truths[i].frame_count) {
        throw Error(ErrorCategory::kConsistency,
                    a.scores[i] + " has " + std::to_string(s.size()) + " frames, ground truth " +
                        truths[i].video_id + " has " + std::to_string(truths[i].frame_count));
      }
      const auto l = intervals_to_labels(truths[i]);
      scores.insert(scores.end(), s.begin(), s.end());
      labels.insert(labels.end(), l.begin(), l.end());
    }
    const MetricValues v = compute_metrics(scores, labels, metrics);
    result["auc"] = optional_json(v.auc);
    result["ap"] = optional_json(v.ap);
    result["frames"] = v.frames;
    result["positives"] = v.positives;
  } else {
    if (a.memory.empty() || a.frames.empty()) {
      throw Error(ErrorCategory::kConfig, "give --scores, or --memory with --frames");
    }
    const StreamConfig cfg = make_config(a.retrieval, a.segment);
    const Memory memory = log.stage("load_memory", [&] { return load_memory(a.memory); });
    const auto videos = log.stage("load_videos", [&] { return load_videos(a.frames, a.ground_truth); });
    const EvalReport r = log.stage("evaluate", [&] { return evaluate_videos(memory, videos, cfg, metrics); });
    result["auc"] = optional_json(r.metrics.auc);
    result["ap"] = optional_json(r.metrics.ap);
    result["frames"] = r.metrics.frames;
    result["positives"] = r.metrics.positives;
    result["segments"] = r.segments;
    result["failed_segments"] = r.failed_segments;
    log.info("throughput", {{"fps", r.fps}, {"median_t_process", r.median_t_process}});
  }
  if (!a.out.empty()) write_text(a.out, result.dump(2) + "\n");
  out << result.dump() << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string memory;
  std::size_t rows = 100000;
  std::size_t dim = 1024;
  double anomalous_share = 0.5;
  std::uint64_t seed = 0;
  std::size_t segments = 100;
  std::size_t warmup = 5;
  double encoder_seconds = 0.0;
  std::string out;
  RetrievalOpts retrieval;
  SegmentOpts segment;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, Log& log) {
  const StreamConfig cfg = make_config(a.retrieval, a.segment);
  const Memory memory = log.stage("prepare_memory", [&] {
    return a.memory.empty() ? random_memory(a.rows, a.dim, a.anomalous_share, a.seed)
                            : load_memory(a.memory);
  });
  ThroughputOptions opts;
  opts.segments = a.segments;
  opts.warmup = a.warmup;
  opts.seed = a.seed;
  opts.encoder_seconds = a.encoder_seconds;
  const LatencyReport report =
      log.stage("measure", [&] { return measure_throughput(memory, cfg, opts); });
  Json summary = report_summary(report);
  summary["rows"] = memory.size();
  summary["dim"] = memory.dim();
  summary["threads"] = cfg.retrieval.threads;
  summary["median_retrieval"] = report.median_retrieval;
  log.info("latency", summary);
  if (!a.out.empty()) {
    io::write_file_atomic(a.out, [&](std::ostream& o) { write_latency_report(o, report); });
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

struct SweepArgs {
  std::string memory;
  std::vector<std::string> frames;
  std::string ground_truth;
  std::string sweep;
  std::string metrics = "auc,ap";
  std::uint64_t seed = 0;
  std::string json_out;
  std::string csv_out;
  RetrievalOpts retrieval;
  SegmentOpts segment;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, Log& log) {
  const SweepSpec spec = parse_sweep(a.sweep);
  SweepOptions opts;
  opts.metrics = parse_metrics(a.metrics);
  opts.seed = a.seed;
  opts.threads = a.retrieval.threads;
  RetrievalOpts base_retrieval = a.retrieval;
  base_retrieval.threads = 1;
  const StreamConfig base = make_config(base_retrieval, a.segment);
  const Memory memory = log.stage("load_memory", [&] { return load_memory(a.memory); });
  const auto videos = log.stage("load_videos", [&] { return load_videos(a.frames, a.ground_truth); });
  const auto rows = log.stage("sweep", [&] { return run_sweep(memory, videos, base, spec, opts); });
  for (const auto& r : rows) {
    if (r.error_category) {
      log.warn("sweep_point_failed",
               {{"point", r.point}, {"category", to_string(*r.error_category)}, {"message", r.error}});
    }
  }
  std::ostringstream json;
  write_sweep_json(json, spec, rows);
  if (!a.json_out.empty()) write_text(a.json_out, json.str());
  if (!a.csv_out.empty()) {
    io::write_file_atomic(a.csv_out, [&](std::ostream& o) { write_sweep_csv(o, rows); });
  }
  out << json.str();
  return kExitOk;
}

struct SynthArgs {
  std::string out_dir;
  std::size_t count = 200;
  std::size_t dim = 256;
  std::uint64_t seed = 0;
  std::string prompt_mode = "full";
  double alpha = kDefaultAlpha;
  SyntheticVideoOptions videos;
};

int cmd_synth(SynthArgs a, std::ostream& out, Log& log) {
  validate_alpha(a.alpha);
  const PromptMode mode = parse_prompt_mode(a.prompt_mode);
  a.videos.seed = a.seed;
  const std::filesystem::path dir = a.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::kIo, "cannot create " + dir.string() + ": " + ec.message());

  const Corpus corpus = generate_sample_corpus(a.count, a.seed);
  const SyntheticTextEmbedder embedder(a.dim, a.seed);
  const Corpus templated = apply_repulsive_prompting(corpus, TemplateSet{}, mode);
  const Memory memory = log.stage("build_memory", [&] {
    return build_memory(templated, embedder, static_cast<float>(a.alpha));
  });
  const auto videos =
      log.stage("generate_videos", [&] { return generate_synthetic_videos(corpus, embedder, a.videos); });

  write_text(dir / "corpus.json", serialize_corpus(corpus));
  save_memory(memory, dir / "memory.fbsm");
  std::vector<GroundTruth> truths;
  Json files = Json::array();
  for (std::size_t i = 0; i < videos.size(); ++i) {
    save_feature_stream(dir / video_file_name(i), videos[i].stream.frames);
    truths.push_back(videos[i].truth);
    files.push_back((dir / video_file_name(i)).string());
  }
  io::write_file_atomic(dir / "ground_truth.jsonl",
                        [&](std::ostream& o) { write_ground_truth(o, truths); });
  out << Json{{"memory", (dir / "memory.fbsm").string()},
              {"ground_truth", (dir / "ground_truth.jsonl").string()},
              {"frames", files}}
             .dump()
      << '\n';
  return kExitOk;
}

int report_error(std::ostream& err, ErrorCategory category, const std::string& message) {
  const int code = exit_code(category);
  err << Json{{"level", "error"},
              {"category", to_string(category)},
              {"exit_code", code},
              {"message", message}}
             .dump()
      << '\n';
  return code;
}

}  // namespace

int exit_code(ErrorCategory category) noexcept {
  return 3 + static_cast<int>(category);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"memvad: retrieval-based video anomaly scoring"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI config file; flags override it")
      ->envname("MEMVAD_CONFIG");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress log records");

  BuildMemoryArgs build;
  auto* build_cmd = app.add_subcommand("build-memory", "Embed a caption corpus into a memory file");
  build_cmd->add_option("--captions", build.captions, "Caption corpus JSON");
  build_cmd->add_option("--sample", build.sample, "Use the built-in generator with N captions per class");
  build_cmd->add_option("--seed", build.seed, "Generator seed")->capture_default_str();
  build_cmd->add_option("--embeddings", build.embeddings, "Precomputed FBEM caption embeddings");
  build_cmd->add_option("--dim", build.dim, "Synthetic embedder dimension")->capture_default_str();
  build_cmd->add_option("--embed-seed", build.embed_seed, "Synthetic embedder seed")
      ->capture_default_str();
  build_cmd->add_option("--prompt-mode", build.prompt_mode, "full|keyword_only|template_only|off")
      ->capture_default_str();
  build_cmd->add_option("--templates", build.templates, "Template configuration JSON");
  build_cmd->add_option("--alpha", build.alpha, "Anomaly scale stored in the memory")
      ->capture_default_str();
  build_cmd->add_flag("--dedup", build.dedup, "Drop repeated captions within each class");
  build_cmd->add_option("--out", build.out, "Output memory file")->required();

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a generated sample corpus");
  gen_cmd->add_option("--count", gen.count, "Captions per class")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output corpus JSON")->required();

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score pre-embedded segments");
  score_cmd->add_option("--memory", score.memory, "Memory file")->required();
  score_cmd->add_option("--segments", score.stream, "Segment embedding stream")->required();
  score_cmd->add_option("--verdicts", score.verdicts, "Output verdict JSONL")->required();
  score_cmd->add_option("--track", score.track, "Output frame track")->required();
  score_cmd->add_option("--track-format", score.track_format, "jsonl|binary")->capture_default_str();
  add_retrieval_options(score_cmd, score.retrieval);
  add_segment_options(score_cmd, score.segment);

  StreamArgs stream;
  auto* stream_cmd = app.add_subcommand("stream", "Run the online loop over a frame stream");
  stream_cmd->add_option("--memory", stream.memory, "Memory file")->required();
  stream_cmd->add_option("--frames", stream.frames, "Frame feature stream")->required();
  stream_cmd->add_option("--verdicts", stream.verdicts, "Output verdict JSONL (default: stdout)");
  stream_cmd->add_option("--track", stream.track, "Output frame track");
  stream_cmd->add_option("--track-format", stream.track_format, "jsonl|binary")->capture_default_str();
  stream_cmd->add_option("--report", stream.report, "Output latency report JSON");
  add_retrieval_options(stream_cmd, stream.retrieval);
  add_segment_options(stream_cmd, stream.segment);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Frame-level AUC/AP against ground truth");
  eval_cmd->add_option("--scores", eval.scores, "Frame track JSONL, one per ground-truth line");
  eval_cmd->add_option("--column", eval.column, "raw|smoothed")->capture_default_str();
  eval_cmd->add_option("--memory", eval.memory, "Memory file (score frame streams directly)");
  eval_cmd->add_option("--frames", eval.frames, "Frame feature streams, one per ground-truth line");
  eval_cmd->add_option("--ground-truth", eval.ground_truth, "Ground-truth JSONL")->required();
  eval_cmd->add_option("--metrics", eval.metrics, "Comma-separated: auc,ap")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Output metrics JSON");
  add_retrieval_options(eval_cmd, eval.retrieval);
  add_segment_options(eval_cmd, eval.segment);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Measure per-segment retrieval latency");
  bench_cmd->add_option("--memory", bench.memory, "Memory file (default: random memory)");
  bench_cmd->add_option("--rows", bench.rows, "Random memory rows")->capture_default_str();
  bench_cmd->add_option("--dim", bench.dim, "Random memory dimension")->capture_default_str();
  bench_cmd->add_option("--anomalous-share", bench.anomalous_share, "Share of anomalous rows")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Seed for memory and queries")->capture_default_str();
  bench_cmd->add_option("--segments", bench.segments, "Measured segments")->capture_default_str();
  bench_cmd->add_option("--warmup", bench.warmup, "Unmeasured warm-up segments")
      ->capture_default_str();
  bench_cmd->add_option("--encoder-seconds", bench.encoder_seconds,
                        "Encoder time added to every segment")
      ->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Output latency report JSON");
  add_retrieval_options(bench_cmd, bench.retrieval);
  add_segment_options(bench_cmd, bench.segment);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Ablation sweep over one parameter");
  sweep_cmd->add_option("--memory", sweep.memory, "Memory file")->required();
  sweep_cmd->add_option("--frames", sweep.frames, "Frame feature streams")->required();
  sweep_cmd->add_option("--ground-truth", sweep.ground_truth, "Ground-truth JSONL")->required();
  sweep_cmd->add_option("--sweep", sweep.sweep, "e.g. alpha=0.80:1.00:0.01")->required();
  sweep_cmd->add_option("--metrics", sweep.metrics, "Comma-separated: auc,ap")->capture_default_str();
  sweep_cmd->add_option("--seed", sweep.seed, "Seed for memory_size subsets")->capture_default_str();
  sweep_cmd->add_option("--json", sweep.json_out, "Output table JSON");
  sweep_cmd->add_option("--csv", sweep.csv_out, "Output plot series CSV");
  add_retrieval_options(sweep_cmd, sweep.retrieval);
  add_segment_options(sweep_cmd, sweep.segment);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic evaluation dataset");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--count", synth.count, "Captions per class")->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim, "Embedding dimension")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--prompt-mode", synth.prompt_mode, "full|keyword_only|template_only|off")
      ->capture_default_str();
  synth_cmd->add_option("--alpha", synth.alpha, "Anomaly scale")->capture_default_str();
  synth_cmd->add_option("--videos", synth.videos.videos, "Number of videos")->capture_default_str();
  synth_cmd->add_option("--duration", synth.videos.duration, "Seconds per video")
      ->capture_default_str();
  synth_cmd->add_option("--video-fps", synth.videos.video_fps, "Frame rate")->capture_default_str();
  synth_cmd->add_option("--noise", synth.videos.noise, "Feature noise scale")->capture_default_str();
  synth_cmd->add_option("--anomaly-fraction", synth.videos.anomaly_fraction,
                        "Anomalous share of each video")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Log log(err, quiet);
  try {
    if (*build_cmd) return cmd_build_memory(build, out, log);
    if (*gen_cmd) return cmd_gen_corpus(gen, out, log);
    if (*score_cmd) return cmd_score(score, out, log);
    if (*stream_cmd) return cmd_stream(stream, out, log);
    if (*eval_cmd) return cmd_eval(eval, out, log);
    if (*bench_cmd) return cmd_bench(bench, out, log);
    if (*sweep_cmd) return cmd_sweep(sweep, out, log);
    if (*synth_cmd) return cmd_synth(synth, out, log);
  } catch (const Error& e) {
    return report_error(err, e.category(), e.what());
  } catch (const std::exception& e) {
    err << Json{{"level", "error"}, {"category", "internal"}, {"exit_code", kExitInternal},
                {"message", e.what()}}
               .dump()
        << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace memvad::cli
