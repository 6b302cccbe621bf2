#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "memvad/binary_io.hpp"
#include "memvad/embedding.hpp"
#include "memvad/error.hpp"

namespace memvad {
namespace {

using testing::TempDir;

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
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

TEST(Fnv1a64, KnownVectors) {
  EXPECT_EQ(io::fnv1a64({}), 0xcbf29ce484222325ULL);
  const std::string a = "a";
  EXPECT_EQ(io::fnv1a64(std::as_bytes(std::span(a.data(), a.size()))), 0xaf63dc4c8601ec8cULL);
  const std::string foobar = "foobar";
  EXPECT_EQ(io::fnv1a64(std::as_bytes(std::span(foobar.data(), foobar.size()))),
            0x85944171f73967e8ULL);
}

TEST(EmbeddingFile, HeaderLayout) {
  TempDir dir;
  EmbeddingMatrix m(2, 4, {1, 2, 3, 4, 5, 6, 7, 8});
  save_embeddings(dir / "m.fbem", m);
  const std::string bytes = read_bytes(dir / "m.fbem");
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 8 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "FBEM");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);  // version, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 4);  // dim
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);  // rows
  float first = 0;
  std::memcpy(&first, bytes.data() + 20, 4);
  EXPECT_EQ(first, 1.0f);

  const EmbeddingMatrix back = load_embeddings(dir / "m.fbem");
  EXPECT_EQ(back.rows(), 2u);
  EXPECT_EQ(back.dim(), 4u);
  EXPECT_EQ(back, m);
}

TEST(EmbeddingFile, TruncatedIsCorruption) {
  TempDir dir;
  save_embeddings(dir / "m.fbem", EmbeddingMatrix(2, 4, {1, 2, 3, 4, 5, 6, 7, 8}));
  std::string bytes = read_bytes(dir / "m.fbem");
  bytes.resize(bytes.size() - 4);  // 7 floats left
  write_bytes(dir / "t.fbem", bytes);
  EXPECT_EQ(category_of([&] { load_embeddings(dir / "t.fbem"); }), ErrorCategory::kCorruption);

  std::istringstream in(bytes);
  EXPECT_EQ(category_of([&] { read_embeddings(in); }), ErrorCategory::kCorruption);
}

TEST(EmbeddingFile, BadMagicAndVersion) {
  TempDir dir;
  save_embeddings(dir / "m.fbem", EmbeddingMatrix(1, 2, {1, 2}));
  std::string bytes = read_bytes(dir / "m.fbem");
  std::string magic = bytes;
  magic[0] = 'X';
  write_bytes(dir / "a.fbem", magic);
  EXPECT_EQ(category_of([&] { load_embeddings(dir / "a.fbem"); }), ErrorCategory::kFormat);
  std::string version = bytes;
  version[4] = 9;
  write_bytes(dir / "b.fbem", version);
  EXPECT_EQ(category_of([&] { load_embeddings(dir / "b.fbem"); }), ErrorCategory::kFormat);
}

TEST(EmbeddingFile, RowCountMismatch) {
  TempDir dir;
  save_embeddings(dir / "m.fbem", EmbeddingMatrix(3, 2, {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(category_of([&] { load_embeddings(dir / "m.fbem", 4); }),
            ErrorCategory::kConsistency);
  EXPECT_NO_THROW(load_embeddings(dir / "m.fbem", 3));
}

TEST(EmbeddingFile, MissingFileIsIo) {
  EXPECT_EQ(category_of([] { load_embeddings("/nonexistent/m.fbem"); }), ErrorCategory::kIo);
}

TEST(EmbeddingFile, RandomRoundTripBitwise) {
  TempDir dir;
  std::mt19937 rng(4);
  std::normal_distribution<float> g;
  std::vector<float> data(100 * 64);
  for (auto& x : data) x = g(rng);
  data[5] = -0.0f;
  data[6] = std::numeric_limits<float>::denorm_min();
  const EmbeddingMatrix m(100, 64, data);
  save_embeddings(dir / "r.fbem", m);
  const EmbeddingMatrix back = load_embeddings(dir / "r.fbem");
  ASSERT_EQ(back.data().size(), data.size());
  EXPECT_EQ(std::memcmp(back.data().data(), data.data(), data.size() * sizeof(float)), 0);
}

TEST(EmbeddingMatrix, RejectsNonFinite) {
  EXPECT_THROW(EmbeddingMatrix(1, 2, {1.0f, std::nanf("")}), Error);
  EXPECT_THROW(EmbeddingMatrix(1, 3, {1.0f, 2.0f}), Error);
}

TEST(L2Normalize, ThreeFourFive) {
  const EmbeddingMatrix n = l2_normalize(EmbeddingMatrix(1, 2, {3, 4}));
  EXPECT_FLOAT_EQ(n.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(n.row(0)[1], 0.8f);
}

TEST(L2Normalize, ZeroRowNamesIndex) {
  try {
    l2_normalize(EmbeddingMatrix(3, 2, {1, 0, 0, 0, 0, 1}));
    FAIL();
  } catch (const DegenerateError& e) {
    EXPECT_EQ(e.row(), 1u);
  }
}

TEST(L2Normalize, RandomRowsAndIdempotence) {
  std::mt19937 rng(10);
  std::uniform_real_distribution<float> u(-3, 3);
  std::vector<float> data(10 * 8);
  for (auto& x : data) x = u(rng);
  const EmbeddingMatrix once = l2_normalize(EmbeddingMatrix(10, 8, data));
  for (std::size_t i = 0; i < 10; ++i) {
    double s = 0;
    for (float x : once.row(i)) s += double(x) * x;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
  }
  const EmbeddingMatrix twice = l2_normalize(once);
  for (std::size_t k = 0; k < data.size(); ++k) {
    EXPECT_NEAR(twice.data()[k], once.data()[k], 1e-7);
  }
}

TEST(SyntheticEmbed, DeterministicUnitNorm) {
  const auto a = synthetic_embed("two men exchange punches", 64, 0);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(synthetic_embed("two men exchange punches", 64, 0), a);
  EXPECT_NEAR(l2_norm(a), 1.0, 1e-6);
}

TEST(SyntheticEmbed, DistinctTextsNotParallel) {
  const auto a = synthetic_embed("people walk along a sidewalk", 512, 0);
  const auto b = synthetic_embed("two men exchange punches", 512, 0);
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * b[i];
  EXPECT_GT(dot, -1.0);
  EXPECT_LT(dot, 1.0);
  EXPECT_NE(dot, 1.0);
}

TEST(SyntheticEmbed, SharedTokensRaiseSimilarity) {
  auto cos = [](const std::vector<float>& a, const std::vector<float>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += double(a[i]) * b[i];
    return d;
  };
  const auto base = synthetic_embed("a man walks a dog", 256, 1);
  const auto near = synthetic_embed("a man walks a cat", 256, 1);
  const auto far = synthetic_embed("fire spreads through warehouse", 256, 1);
  EXPECT_GT(cos(base, near), cos(base, far));
}

TEST(SyntheticEmbed, RejectsTinyDim) { EXPECT_THROW(synthetic_embed("x", 1, 0), Error); }

TEST(RandomUnitVector, Deterministic) {
  EXPECT_EQ(random_unit_vector(32, 5, 7), random_unit_vector(32, 5, 7));
  EXPECT_NE(random_unit_vector(32, 5, 7), random_unit_vector(32, 5, 8));
  EXPECT_NEAR(l2_norm(random_unit_vector(32, 5, 7)), 1.0, 1e-6);
}

TEST(AtomicWrite, FailureLeavesNoFile) {
  TempDir dir;
  const auto target = dir / "out.bin";
  EXPECT_THROW(io::write_file_atomic(target,
                                     [](std::ostream& o) {
                                       o << "partial";
                                       throw Error(ErrorCategory::kIo, "boom");
                                     }),
               Error);
  EXPECT_FALSE(std::filesystem::exists(target));
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir.path()),
                          std::filesystem::directory_iterator{}),
            0);
}

}  // namespace
}  // namespace memvad
