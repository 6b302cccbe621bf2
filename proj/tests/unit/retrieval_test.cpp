#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "memvad/error.hpp"
#include "memvad/retrieval.hpp"
#include "memvad/synthetic.hpp"
#include "oracles.hpp"

namespace memvad {
namespace {

using testing::flags_of;
using testing::memory_from_rows;
using testing::rows_of;

SegmentQuery query_from(const std::vector<double>& v, std::size_t index = 0) {
  return make_query(std::vector<float>(v.begin(), v.end()), 0.0, 1.0, index);
}

Memory random_memory_rows(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t n_normal,
                          float alpha = kDefaultAlpha) {
  return memory_from_rows(oracle::random_rows(rng, n, d), n_normal, alpha);
}

TEST(PenalizedSimilarities, AlphaOneIsPlainDot) {
  std::mt19937_64 rng(1);
  const Memory m = random_memory_rows(rng, 50, 8, 25, 1.0f);
  const auto q = query_from(oracle::random_rows(rng, 1, 8)[0]);
  RetrievalConfig off;
  off.penalize = false;
  EXPECT_EQ(penalized_similarities(m, q.embedding), penalized_similarities(m, q.embedding, off));
}

TEST(PenalizedSimilarities, SelfSimilarityTimesAlpha) {
  std::mt19937_64 rng(2);
  const Memory m = random_memory_rows(rng, 20, 16, 10, 0.95f);
  const std::vector<float> q(m.row(15).begin(), m.row(15).end());
  EXPECT_NEAR(penalized_similarities(m, q)[15], 0.95, 1e-6);
}

TEST(PenalizedSimilarities, MatchesScalarRecomputation) {
  std::mt19937_64 rng(3);
  const Memory m = random_memory_rows(rng, 1000, 32, 600);
  const auto rows = rows_of(m);
  const auto q = query_from(oracle::random_rows(rng, 1, 32)[0]);
  const auto sims = penalized_similarities(m, q.embedding);
  for (std::size_t j = 0; j < m.size(); ++j) {
    double dot = 0;
    for (std::size_t d = 0; d < 32; ++d) dot += rows[j][d] * q.embedding[d];
    if (j >= 600) dot *= 0.95;
    ASSERT_NEAR(sims[j], dot, 1e-6) << j;
  }
}

TEST(PenalizedSimilarities, EquivalentToScalingEmbeddings) {
  std::mt19937_64 rng(4);
  const Memory m = random_memory_rows(rng, 100, 16, 50, 0.8f);
  const auto rows = rows_of(m);
  const auto q = query_from(oracle::random_rows(rng, 1, 16)[0]);
  const auto sims = penalized_similarities(m, q.embedding);
  for (std::size_t j = 50; j < 100; ++j) {
    double dot = 0;
    for (std::size_t d = 0; d < 16; ++d) dot += (0.8 * rows[j][d]) * q.embedding[d];
    EXPECT_NEAR(sims[j], dot, 1e-6);
  }
}

TEST(PenalizedSimilarities, DimensionMismatchIsQueryError) {
  std::mt19937_64 rng(5);
  const Memory m = random_memory_rows(rng, 10, 8, 5);
  try {
    penalized_similarities(m, std::vector<float>(7, 0.1f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kQuery);
  }
}

TEST(TopKSelect, OrderStatistics) {
  const std::vector<float> s{0.1f, 0.9f, 0.5f};
  const auto r = top_k_select(s, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_EQ(r[1].index, 2u);
}

TEST(TopKSelect, TieGoesToLowerIndex) {
  const auto r = top_k_select(std::vector<float>{0.5f, 0.5f}, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].index, 0u);
}

TEST(TopKSelect, KLargerThanN) {
  const auto r = top_k_select(std::vector<float>{0.2f, 0.4f}, 10);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].index, 1u);
}

TEST(TopKSelect, EmptyIsQueryError) {
  try {
    top_k_select(std::vector<float>{}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kQuery);
  }
}

TEST(TopKSelect, MatchesFullSortWithTies) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> level(0, 20);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> s(5000);
    for (auto& x : s) x = static_cast<float>(level(rng)) / 8.0f;
    const auto got = top_k_select(s, 10);
    const auto want = oracle::full_sort_top_k(s, 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_EQ(got[i].index, want[i]);
  }
}

TEST(RetrieveTopK, PartitionedEqualsSequential) {
  std::mt19937_64 rng(7);
  const Memory m = random_memory(40000, 16, 0.5, 3);
  RetrievalConfig seq;
  RetrievalConfig par;
  par.threads = 4;
  for (int i = 0; i < 20; ++i) {
    const auto q = random_unit_vector(16, 99, static_cast<std::uint64_t>(i));
    EXPECT_EQ(retrieve_top_k(m, q, seq), retrieve_top_k(m, q, par));
    const auto sims = penalized_similarities(m, q);
    const auto want = oracle::full_sort_top_k(sims, 10);
    const auto got = retrieve_top_k(m, q, seq);
    for (std::size_t k = 0; k < want.size(); ++k) ASSERT_EQ(got[k].index, want[k]);
  }
}

TEST(RetrieveTopK, DuplicateRowsTieByIndex) {
  const Memory m = memory_from_rows({{1, 0}, {0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}}, 4);
  RetrievalConfig cfg;
  cfg.top_k = 2;
  const auto r = retrieve_top_k(m, std::vector<float>{0.6f, 0.8f}, cfg);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_EQ(r[1].index, 2u);
}

TEST(ScoreSegment, FlagFloorAndCeiling) {
  const Memory all_normal = memory_from_rows({{1, 0}, {0, 1}, {0.6, 0.8}, {-1, 0}}, 3);
  RetrievalConfig cfg;
  cfg.top_k = 3;
  const auto q = query_from({1, 0});
  EXPECT_EQ(score_segment(all_normal, q, cfg).score, 0.0);

  const Memory all_anomalous = memory_from_rows({{-1, 0}, {1, 0}, {0, 1}, {0.6, 0.8}}, 1);
  EXPECT_DOUBLE_EQ(score_segment(all_anomalous, q, cfg).score, 1.0);
}

TEST(ScoreSegment, SingletonWeightIsOne) {
  std::mt19937_64 rng(8);
  const Memory m = random_memory_rows(rng, 100, 8, 50);
  RetrievalConfig cfg;
  cfg.top_k = 1;
  for (int i = 0; i < 20; ++i) {
    const auto q = query_from(oracle::random_rows(rng, 1, 8)[0]);
    const auto v = score_segment(m, q, cfg);
    ASSERT_EQ(v.matches.size(), 1u);
    EXPECT_EQ(v.matches[0].weight, 1.0);
    EXPECT_EQ(v.score, v.matches[0].flag == Flag::kAnomalous ? 1.0 : 0.0);
  }
}

TEST(ScoreSegment, MatchesOracle) {
  std::mt19937_64 rng(9);
  const Memory m = random_memory_rows(rng, 2000, 16, 1000);
  const auto rows = rows_of(m);
  const auto flags = flags_of(m);
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    const auto q = query_from(oracle::random_rows(rng, 1, 16)[0]);
    const std::vector<double> qd(q.embedding.begin(), q.embedding.end());
    const auto o = oracle::score(rows, flags, qd, 0.95, 10, 1.0);
    if (o.boundary_gap < 1e-5) continue;
    const auto v = score_segment(m, q);
    EXPECT_NEAR(v.score, o.score, 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 40);
}

TEST(ScoreSegment, MatchesCarryExplanations) {
  const Memory m = memory_from_rows({{1, 0}, {0, 1}}, 1);
  const auto v = score_segment(m, query_from({1, 0}));
  ASSERT_EQ(v.matches.size(), 2u);
  EXPECT_EQ(v.matches[0].text, "caption 0");
  EXPECT_EQ(v.matches[0].flag, Flag::kNormal);
  double total = 0;
  for (const auto& mt : v.matches) total += mt.weight;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ScoreSegment, RejectsBadQueries) {
  const Memory m = memory_from_rows({{1, 0}, {0, 1}}, 1);
  SegmentQuery q = query_from({1, 0});
  q.embedding = {2.0f, 0.0f};
  EXPECT_THROW(score_segment(m, q), Error);
  q = query_from({1, 0});
  q.end_time = q.start_time;
  EXPECT_THROW(score_segment(m, q), Error);
  EXPECT_THROW(make_query({0.0f, 0.0f}, 0, 1, 0), DegenerateError);
}

TEST(ScoreSegment, MonotoneInAlphaForNonnegativeAnomalousSims) {
  std::mt19937_64 rng(10);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 30; ++trial) {
    auto rows = oracle::random_rows(rng, 60, 6);
    for (auto& r : rows) {
      for (auto& x : r) x = std::abs(x);
    }
    const auto q = query_from(oracle::random_rows(rng, 1, 6)[0]);
    std::vector<double> qd(q.embedding.begin(), q.embedding.end());
    for (auto& x : qd) x = std::abs(x);
    const auto qq = query_from(qd);
    const Memory base = memory_from_rows(rows, 30, 1.0f);
    double prev = -1.0;
    for (float a : {0.5f, 0.8f, 0.9f, 0.95f, 1.0f}) {
      const double s = score_segment(base.with_alpha(a), qq).score;
      EXPECT_GE(s, prev - 1e-12);
      prev = s;
    }
    ++checked;
  }
}

TEST(ScoreBatch, SingletonEmptyAndOrder) {
  std::mt19937_64 rng(11);
  const Memory m = random_memory_rows(rng, 500, 8, 250);
  EXPECT_TRUE(score_batch(m, {}).empty());

  std::vector<SegmentQuery> queries;
  for (std::size_t i = 0; i < 100; ++i) queries.push_back(query_from(oracle::random_rows(rng, 1, 8)[0], i));
  const auto one = score_batch(m, std::span(queries).first(1));
  ASSERT_TRUE(one[0].verdict);
  EXPECT_EQ(*one[0].verdict, score_segment(m, queries[0]));

  RetrievalConfig threaded;
  threaded.threads = 4;
  const auto batch = score_batch(m, queries, threaded);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    ASSERT_TRUE(batch[i].verdict);
    EXPECT_EQ(*batch[i].verdict, score_segment(m, queries[i]));
  }
}

TEST(ScoreBatch, PerQueryErrorsAndFailFast) {
  const Memory m = memory_from_rows({{1, 0}, {0, 1}}, 1);
  std::vector<SegmentQuery> queries{query_from({1, 0}, 0), query_from({0, 1}, 1)};
  queries[1].embedding = {1.0f, 0.0f, 0.0f};
  const auto out = score_batch(m, queries);
  EXPECT_TRUE(out[0].verdict);
  ASSERT_TRUE(out[1].error);
  EXPECT_EQ(out[1].error->category(), ErrorCategory::kQuery);
  EXPECT_THROW(score_batch(m, queries, {}, true), Error);
}

TEST(RetrievalConfig, Validation) {
  RetrievalConfig c;
  c.top_k = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.temperature = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.alpha_override = 1.5f;
  EXPECT_THROW(c.validate(), Error);
}

TEST(DotProduct, MatchesNaive) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<float> u(-1, 1);
  for (std::size_t n : {1u, 15u, 16u, 17u, 64u, 1000u}) {
    std::vector<float> a(n), b(n);
    double want = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      want += double(a[i]) * b[i];
    }
    EXPECT_NEAR(dot_product(a, b), want, 1e-5);
  }
}

}  // namespace
}  // namespace memvad
