#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "memvad/binary_io.hpp"
#include "memvad/corpus.hpp"
#include "memvad/error.hpp"
#include "memvad/memory_store.hpp"
#include "oracles.hpp"

namespace memvad {
namespace {

using testing::TempDir;

Corpus small_corpus() {
  return parse_corpus(R"({
    "normal": [{"action category": "walking", "description": "people walk"},
               {"action category": "cooking", "description": "a chef stirs a pot"}],
    "anomalous": [{"action category": "fighting", "description": "two men exchange punches"},
                  {"action category": "robbery", "description": "a man grabs a purse"}]})");
}

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCategory::kConfig;
}

/// Writes an FBSM file with explicit header counts and caption table so that
/// inconsistent files carry a valid checksum.
void write_raw_memory(const std::filesystem::path& path, std::uint64_t n_normal,
                      std::uint64_t n_anomalous, const std::vector<int>& table_flags,
                      std::size_t dim, std::size_t block_rows, std::uint32_t version = 1) {
  std::ofstream out(path, std::ios::binary);
  io::BinaryWriter w(out);
  w.bytes(std::as_bytes(std::span("FBSM", 4)));
  w.u32(version);
  w.u32(static_cast<std::uint32_t>(dim));
  w.u64(n_normal);
  w.u64(n_anomalous);
  w.f32(0.95f);
  w.u8(1);
  for (int f : table_flags) {
    w.string("text");
    w.string("cat");
    w.u8(static_cast<std::uint8_t>(f));
  }
  w.bytes(std::as_bytes(std::span("FBEM", 4)));
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(dim));
  w.u64(block_rows);
  std::vector<float> data(block_rows * dim, 0.0f);
  for (std::size_t i = 0; i < block_rows; ++i) data[i * dim] = 1.0f;
  w.floats(data);
  const auto sum = w.checksum();
  w.u64(sum);
}

TEST(BuildMemory, TwoPlusTwo) {
  const Memory m = build_memory(small_corpus(), SyntheticTextEmbedder(8, 0), 0.95f);
  EXPECT_EQ(m.size(), 4u);
  EXPECT_EQ(m.dim(), 8u);
  EXPECT_EQ(m.flags(), (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_FLOAT_EQ(m.alpha(), 0.95f);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(l2_norm(m.row(i)), 1.0, 1e-6);
}

TEST(BuildMemory, AlphaRange) {
  EXPECT_EQ(category_of([] { build_memory(small_corpus(), SyntheticTextEmbedder(8, 0), 1.3f); }),
            ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { build_memory(small_corpus(), SyntheticTextEmbedder(8, 0), 0.0f); }),
            ErrorCategory::kConfig);
  EXPECT_NO_THROW(build_memory(small_corpus(), SyntheticTextEmbedder(8, 0), 1.0f));
}

TEST(BuildMemory, DimensionDisagreement) {
  struct Bad final : TextEmbedder {
    std::size_t dim() const override { return 4; }
    std::vector<float> embed(std::string_view text) const override {
      return std::vector<float>(text.size() % 2 == 0 ? 4 : 5, 1.0f);
    }
  };
  EXPECT_THROW(build_memory(small_corpus(), Bad{}), Error);
}

TEST(BuildMemory, ZeroVectorIsDegenerate) {
  struct Zero final : TextEmbedder {
    std::size_t dim() const override { return 4; }
    std::vector<float> embed(std::string_view) const override { return std::vector<float>(4, 0.0f); }
  };
  EXPECT_EQ(category_of([] { build_memory(small_corpus(), Zero{}); }), ErrorCategory::kDegenerate);
}

TEST(BuildMemory, Deterministic) {
  const Corpus c = generate_sample_corpus(50, 2);
  EXPECT_TRUE(build_memory(c, SyntheticTextEmbedder(32, 1)) ==
              build_memory(c, SyntheticTextEmbedder(32, 1)));
}

TEST(BuildMemory, PayloadArithmetic) {
  const Memory m = build_memory(small_corpus(), SyntheticTextEmbedder(8, 0));
  EXPECT_EQ(m.payload_bytes(), 4u * 8u * 4u);
  // Two million rows at D = 1024.
  EXPECT_EQ(std::uint64_t{2'000'000} * 1024 * sizeof(float), 8'192'000'000ULL);
}

TEST(MemoryFile, RoundTrip) {
  TempDir dir;
  const Memory m = build_memory(small_corpus(), SyntheticTextEmbedder(8, 0), 0.9f);
  save_memory(m, dir / "m.fbsm");
  const Memory back = load_memory(dir / "m.fbsm");
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.captions()[2].text, m.captions()[2].text);
  EXPECT_FLOAT_EQ(back.alpha(), 0.9f);
}

TEST(MemoryFile, CorruptedByteFailsChecksum) {
  TempDir dir;
  save_memory(build_memory(small_corpus(), SyntheticTextEmbedder(8, 0)), dir / "m.fbsm");
  std::fstream f(dir / "m.fbsm", std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(-12, std::ios::end);
  char c = 0;
  f.read(&c, 1);
  c ^= 0x10;
  f.seekp(-12, std::ios::end);
  f.write(&c, 1);
  f.close();
  EXPECT_EQ(category_of([&] { load_memory(dir / "m.fbsm"); }), ErrorCategory::kCorruption);
}

TEST(MemoryFile, HeaderCountDisagreesWithTable) {
  TempDir dir;
  // Header claims 2 + 2 but the table holds three records.
  write_raw_memory(dir / "m.fbsm", 2, 2, {0, 0, 1}, 4, 3);
  EXPECT_EQ(category_of([&] { load_memory(dir / "m.fbsm"); }), ErrorCategory::kConsistency);
  // Table matches but the embedding block is short a row.
  write_raw_memory(dir / "n.fbsm", 2, 2, {0, 0, 1, 1}, 4, 3);
  EXPECT_EQ(category_of([&] { load_memory(dir / "n.fbsm"); }), ErrorCategory::kConsistency);
  // Flags out of order.
  write_raw_memory(dir / "o.fbsm", 2, 2, {0, 1, 0, 1}, 4, 4);
  EXPECT_EQ(category_of([&] { load_memory(dir / "o.fbsm"); }), ErrorCategory::kConsistency);
  write_raw_memory(dir / "ok.fbsm", 2, 2, {0, 0, 1, 1}, 4, 4);
  EXPECT_NO_THROW(load_memory(dir / "ok.fbsm"));
}

TEST(MemoryFile, VersionMismatch) {
  TempDir dir;
  write_raw_memory(dir / "m.fbsm", 1, 1, {0, 1}, 4, 2, 7);
  EXPECT_EQ(category_of([&] { load_memory(dir / "m.fbsm"); }), ErrorCategory::kVersion);
}

TEST(MemoryFile, MissingIsIo) {
  EXPECT_EQ(category_of([] { load_memory("/nonexistent/m.fbsm"); }), ErrorCategory::kIo);
}

TEST(Memory, WithAlphaAndSubset) {
  const Memory m = build_memory(generate_sample_corpus(30, 4), SyntheticTextEmbedder(16, 0));
  const Memory a = m.with_alpha(0.5f);
  EXPECT_FLOAT_EQ(a.alpha(), 0.5f);
  EXPECT_FLOAT_EQ(m.alpha(), kDefaultAlpha);
  const Memory s = m.subset(10, 5, 3);
  EXPECT_EQ(s.n_normal(), 10u);
  EXPECT_EQ(s.n_anomalous(), 5u);
  EXPECT_TRUE(s == m.subset(10, 5, 3));
  EXPECT_THROW(m.subset(31, 1, 0), Error);
}

TEST(CentroidAngle, Orthogonal) {
  const Memory m = testing::memory_from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}}, 2);
  EXPECT_NEAR(centroid_angle(m), 90.0, 1e-12);
}

TEST(CentroidAngle, Coincident) {
  const Memory m = testing::memory_from_rows({{0.6, 0.8}, {0.6, 0.8}}, 1);
  EXPECT_NEAR(centroid_angle(m), 0.0, 1e-4);
}

TEST(CentroidAngle, ZeroCentroidIsDegenerate) {
  const Memory m = testing::memory_from_rows({{1, 0}, {-1, 0}, {0, 1}}, 2);
  EXPECT_EQ(category_of([&] { centroid_angle(m); }), ErrorCategory::kDegenerate);
}

TEST(CentroidAngle, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  const auto rows = oracle::random_rows(rng, 200, 16);
  const Memory m = testing::memory_from_rows(rows, 100);
  EXPECT_NEAR(centroid_angle(m), oracle::centroid_angle(m.embeddings(), 100), 1e-9);
}

}  // namespace
}  // namespace memvad
