#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "memvad/corpus.hpp"
#include "memvad/error.hpp"
#include "memvad/evaluation.hpp"
#include "memvad/synthetic.hpp"
#include "memvad/temporal.hpp"
#include "oracles.hpp"

namespace memvad {
namespace {

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCategory::kConfig;
}

std::vector<std::uint8_t> bits(const std::string& s) {
  std::vector<std::uint8_t> out;
  for (char c : s) out.push_back(c == '1');
  return out;
}

struct SmallSetup {
  Corpus corpus = generate_sample_corpus(40, 5);
  SyntheticTextEmbedder embedder{32, 0};
  Memory memory = build_memory(apply_repulsive_prompting(corpus, TemplateSet{}, PromptMode::kFull),
                               embedder);
  std::vector<EvalVideo> videos;
  SmallSetup() {
    SyntheticVideoOptions o;
    o.videos = 2;
    o.duration = 12;
    o.seed = 3;
    videos = generate_synthetic_videos(corpus, embedder, o);
  }
};

TEST(RocAuc, Fixtures) {
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.9, 0.1}, bits("10")), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.9}, bits("10")), 0.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.5, 0.5}, bits("10")), 0.5);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.2, 0.4, 0.4, 0.9}, bits("0101")), 0.875);
}

TEST(RocAuc, SingleClassIsUndefined) {
  EXPECT_EQ(category_of([] { roc_auc(std::vector<double>{0.1, 0.2}, bits("00")); }),
            ErrorCategory::kUndefinedMetric);
  EXPECT_EQ(category_of([] { roc_auc(std::vector<double>{0.1, 0.2}, bits("11")); }),
            ErrorCategory::kUndefinedMetric);
}

TEST(RocAuc, LengthMismatch) {
  EXPECT_THROW(roc_auc(std::vector<double>{0.1}, bits("01")), Error);
}

TEST(AveragePrecision, Fixtures) {
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.9, 0.1}, bits("01")), 0.5);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.9, 0.1}, bits("10")), 1.0);
  // Ties resolve by index: frame 0 ranks first.
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.5, 0.5}, bits("01")), 0.5);
  EXPECT_EQ(category_of([] { average_precision(std::vector<double>{0.1, 0.2}, bits("00")); }),
            ErrorCategory::kUndefinedMetric);
}

TEST(Metrics, MatchOracles) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> level(0, 30);
  std::bernoulli_distribution pos(0.3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial * 3;
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 30.0;
      y[i] = pos(rng);
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(roc_auc(s, y), oracle::auc_pairwise(s, y), 1e-12);
    EXPECT_NEAR(average_precision(s, y), oracle::ap_rank_scan(s, y), 1e-12);
  }
}

TEST(Metrics, MonotoneTransformInvariant) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(300), t(300);
  std::vector<std::uint8_t> y(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    t[i] = std::exp(3 * s[i]) - 7;
    y[i] = u(rng) < 0.4;
  }
  EXPECT_NEAR(roc_auc(s, y), roc_auc(t, y), 1e-12);
  EXPECT_NEAR(average_precision(s, y), average_precision(t, y), 1e-12);
}

TEST(Metrics, ParseAndCompute) {
  const MetricSet only_auc = parse_metrics("auc");
  EXPECT_TRUE(only_auc.auc);
  EXPECT_FALSE(only_auc.ap);
  EXPECT_THROW(parse_metrics("auc,f1"), Error);
  const auto v = compute_metrics(std::vector<double>{0.9, 0.1, 0.2}, bits("100"), MetricSet{});
  EXPECT_DOUBLE_EQ(*v.auc, 1.0);
  EXPECT_DOUBLE_EQ(*v.ap, 1.0);
  EXPECT_EQ(v.frames, 3u);
  EXPECT_EQ(v.positives, 1u);
}

TEST(GroundTruth, IntervalsToLabels) {
  GroundTruth g{"v", 10, {{2, 5}}};
  EXPECT_EQ(intervals_to_labels(g), bits("0011100000"));
  g.intervals = {{5, 7}, {2, 5}};
  EXPECT_EQ(intervals_to_labels(g), bits("0011111000"));
  EXPECT_EQ(normalize(g).intervals, (std::vector<FrameInterval>{{2, 7}}));
}

TEST(GroundTruth, OverlapAndRangeAreValidationErrors) {
  EXPECT_EQ(category_of([] { normalize(GroundTruth{"v", 10, {{2, 5}, {4, 6}}}); }),
            ErrorCategory::kValidation);
  EXPECT_EQ(category_of([] { normalize(GroundTruth{"v", 10, {{8, 12}}}); }),
            ErrorCategory::kValidation);
  EXPECT_EQ(category_of([] { normalize(GroundTruth{"v", 10, {{3, 3}}}); }),
            ErrorCategory::kValidation);
}

TEST(GroundTruth, JsonlRoundTripAndErrors) {
  const std::vector<GroundTruth> truths{{"a", 10, {{1, 3}}}, {"b", 5, {}}};
  std::stringstream buf;
  write_ground_truth(buf, truths);
  const auto back = parse_ground_truth(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].video_id, "a");
  EXPECT_EQ(back[0].intervals, truths[0].intervals);
  EXPECT_EQ(back[1].frame_count, 5u);

  std::istringstream bad("{\"video_id\": \"a\", \"frame_count\": 3, \"intervals\": []}\n{oops\n");
  try {
    parse_ground_truth(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(GroundTruth, FixturesGivePerfectScore) {
  const auto truth = load_ground_truth(MEMVAD_FIXTURE_DIR "/perfect_truth.jsonl");
  std::ifstream track(MEMVAD_FIXTURE_DIR "/perfect_track.jsonl");
  const auto scores = read_track_scores_jsonl(track, "raw");
  ASSERT_EQ(truth.size(), 1u);
  const auto labels = intervals_to_labels(truth[0]);
  EXPECT_DOUBLE_EQ(roc_auc(scores, labels), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(scores, labels), 1.0);
}

TEST(EvaluateVideos, SyntheticDataIsSeparable) {
  SmallSetup s;
  const auto r = evaluate_videos(s.memory, s.videos, StreamConfig{});
  ASSERT_TRUE(r.metrics.auc);
  EXPECT_GT(*r.metrics.auc, 0.8);
  EXPECT_EQ(r.metrics.frames, 720u);
  EXPECT_EQ(r.segments, 24u);
  EXPECT_EQ(r.failed_segments, 0u);
}

TEST(EvaluateVideos, FrameRateMismatchIsConsistencyError) {
  SmallSetup s;
  StreamConfig c;
  c.video_fps = 10;
  EXPECT_EQ(category_of([&] { evaluate_videos(s.memory, s.videos, c); }),
            ErrorCategory::kConsistency);
}

TEST(EvaluateVideos, ThreadsDoNotChangeMetrics) {
  SmallSetup s;
  StreamConfig threaded;
  threaded.retrieval.threads = 3;
  const auto a = evaluate_videos(s.memory, s.videos, StreamConfig{});
  const auto b = evaluate_videos(s.memory, s.videos, threaded);
  EXPECT_EQ(*a.metrics.auc, *b.metrics.auc);
  EXPECT_EQ(*a.metrics.ap, *b.metrics.ap);
}

TEST(Sweep, ParseRangesAndLists) {
  const auto a = parse_sweep("alpha=0.80:1.00:0.05");
  EXPECT_EQ(a.parameter, SweepParameter::kAlpha);
  EXPECT_EQ(a.points, (std::vector<std::string>{"0.8", "0.85", "0.9", "0.95", "1"}));
  const auto k = parse_sweep("top_k=1,5,10");
  EXPECT_EQ(k.parameter, SweepParameter::kTopK);
  EXPECT_EQ(k.points.size(), 3u);
  const auto g = parse_sweep("segment_params=1/0/16,2/1/8");
  EXPECT_EQ(g.points[1], "2/1/8");
  EXPECT_THROW(parse_sweep("beta=1,2"), Error);
  EXPECT_THROW(parse_sweep("alpha"), Error);
  EXPECT_THROW(parse_sweep("alpha=1:0:0.1"), Error);
}

TEST(Sweep, AlphaOneEqualsNoPenalty) {
  SmallSetup s;
  const auto rows = run_sweep(s.memory, s.videos, StreamConfig{}, parse_sweep("alpha=1"));
  StreamConfig off;
  off.retrieval.penalize = false;
  const auto base = evaluate_videos(s.memory, s.videos, off);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(*rows[0].auc, *base.metrics.auc);
  EXPECT_EQ(*rows[0].ap, *base.metrics.ap);
}

TEST(Sweep, DeterministicAcrossThreads) {
  SmallSetup s;
  const auto spec = parse_sweep("top_k=1,3,10");
  SweepOptions two;
  two.threads = 2;
  const auto a = run_sweep(s.memory, s.videos, StreamConfig{}, spec);
  const auto b = run_sweep(s.memory, s.videos, StreamConfig{}, spec, two);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].point, b[i].point);
    EXPECT_EQ(a[i].auc, b[i].auc);
    EXPECT_EQ(a[i].ap, b[i].ap);
  }
}

TEST(Sweep, BadPointsBecomeErrorRows) {
  SmallSetup s;
  const auto rows =
      run_sweep(s.memory, s.videos, StreamConfig{}, parse_sweep("segment_params=1/0/16,1/1/16,2/1/8"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].auc);
  EXPECT_FALSE(rows[1].auc);
  EXPECT_EQ(rows[1].error_category, ErrorCategory::kConfig);
  EXPECT_TRUE(rows[2].auc);

  const auto sizes = run_sweep(s.memory, s.videos, StreamConfig{}, parse_sweep("memory_size=20,80,500"));
  EXPECT_TRUE(sizes[0].auc);
  EXPECT_TRUE(sizes[1].auc);
  EXPECT_FALSE(sizes[2].auc);

  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "point,auc,ap,fps,error");
  std::ostringstream json;
  write_sweep_json(json, parse_sweep("segment_params=1/0/16"), rows);
  EXPECT_NE(json.str().find("\"segment_params\""), std::string::npos);
}

}  // namespace
}  // namespace memvad
