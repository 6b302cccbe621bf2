#include "memvad/memory_store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "memvad/binary_io.hpp"
#include "memvad/error.hpp"
#include "rng.hpp"

namespace memvad {
namespace {

constexpr std::array<char, 4> kMagic{'F', 'B', 'S', 'M'};
constexpr double kUnitTolerance = 1e-5;

std::vector<CaptionRecord> records_from(const Corpus& corpus) {
  std::vector<CaptionRecord> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& c = corpus.at(i);
    out.push_back({c.text, c.source.category, c.source.flag, i});
  }
  return out;
}

void check_buildable(const Corpus& corpus) {
  if (corpus.normals.empty() || corpus.anomalies.empty()) {
    throw Error(ErrorCategory::kValidation,
                "memory needs at least one normal and one anomalous caption");
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& c = corpus.at(i);
    const Flag expected = i < corpus.normals.size() ? Flag::kNormal : Flag::kAnomalous;
    if (c.source.flag != expected) {
      throw Error(ErrorCategory::kValidation,
                  "caption " + std::to_string(i) + " is filed under the wrong class");
    }
  }
}

double angle_degrees(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    dot += a[d] * b[d];
    na += a[d] * a[d];
    nb += b[d] * b[d];
  }
  if (!(na > 0.0)) throw DegenerateError("normal centroid is zero", 0);
  if (!(nb > 0.0)) throw DegenerateError("anomalous centroid is zero", 1);
  const double cosine = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

}  // namespace

void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCategory::kConfig,
                "alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
}

Memory Memory::from_parts(std::vector<CaptionRecord> captions, EmbeddingMatrix embeddings,
                          std::size_t n_normal, float alpha) {
  validate_alpha(alpha);
  if (embeddings.rows() != captions.size()) {
    throw Error(ErrorCategory::kConsistency,
                "memory has " + std::to_string(captions.size()) + " captions but " +
                    std::to_string(embeddings.rows()) + " embedding rows");
  }
  if (n_normal > captions.size()) {
    throw Error(ErrorCategory::kConsistency, "n_normal exceeds caption count");
  }
  if (embeddings.dim() == 0) throw Error(ErrorCategory::kValidation, "memory dim is zero");
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const Flag expected = i < n_normal ? Flag::kNormal : Flag::kAnomalous;
    if (captions[i].flag != expected) {
      throw Error(ErrorCategory::kConsistency,
                  "caption " + std::to_string(i) + " flag disagrees with normals-first layout");
    }
    const double n = l2_norm(embeddings.row(i));
    if (std::abs(n - 1.0) > kUnitTolerance) {
      throw Error(ErrorCategory::kValidation,
                  "memory row " + std::to_string(i) + " is not unit norm (" + std::to_string(n) +
                      ")");
    }
  }
  Memory m;
  m.captions_ = std::move(captions);
  m.embeddings_ = std::move(embeddings);
  m.n_normal_ = n_normal;
  m.alpha_ = alpha;
  return m;
}

std::vector<std::uint8_t> Memory::flags() const {
  std::vector<std::uint8_t> y(size(), 0);
  std::fill(y.begin() + static_cast<std::ptrdiff_t>(n_normal_), y.end(), 1);
  return y;
}

Memory Memory::clone() const {
  Memory m;
  m.captions_ = captions_;
  m.embeddings_ = embeddings_;
  m.n_normal_ = n_normal_;
  m.alpha_ = alpha_;
  return m;
}

Memory Memory::with_alpha(float alpha) const {
  validate_alpha(alpha);
  Memory m = clone();
  m.alpha_ = alpha;
  return m;
}

Memory Memory::subset(std::size_t n_normal, std::size_t n_anomalous, std::uint64_t seed) const {
  if (n_normal == 0 || n_anomalous == 0 || n_normal > n_normal_ ||
      n_anomalous > this->n_anomalous()) {
    throw Error(ErrorCategory::kConfig,
                "memory subset " + std::to_string(n_normal) + "+" + std::to_string(n_anomalous) +
                    " is not within " + std::to_string(n_normal_) + "+" +
                    std::to_string(this->n_anomalous()));
  }
  detail::SplitMix64 rng(detail::mix64(seed, 0x737562ULL));
  auto pick = [&](std::size_t begin, std::size_t count, std::size_t keep) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), begin);
    for (std::size_t i = 0; i < keep; ++i) {  // partial Fisher-Yates
      const std::size_t j = i + rng.below(count - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  auto rows = pick(0, n_normal_, n_normal);
  const auto anomalous = pick(n_normal_, this->n_anomalous(), n_anomalous);
  rows.insert(rows.end(), anomalous.begin(), anomalous.end());

  Memory m;
  m.embeddings_ = EmbeddingMatrix(rows.size(), dim());
  m.captions_.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CaptionRecord rec = captions_[rows[i]];
    rec.corpus_index = i;
    m.captions_.push_back(std::move(rec));
    std::copy_n(row(rows[i]).begin(), dim(), m.embeddings_.row(i).begin());
  }
  m.n_normal_ = n_normal;
  m.alpha_ = alpha_;
  return m;
}

Memory build_memory(const Corpus& corpus, const TextEmbedder& embedder, float alpha) {
  validate_alpha(alpha);
  check_buildable(corpus);
  const std::size_t dim = embedder.dim();
  EmbeddingMatrix rows(corpus.size(), dim);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto v = embedder.embed(corpus.at(i).text);
    if (v.size() != dim) {
      throw Error(ErrorCategory::kValidation,
                  "embedder returned dim " + std::to_string(v.size()) + " for caption " +
                      std::to_string(i) + ", expected " + std::to_string(dim));
    }
    std::copy(v.begin(), v.end(), rows.row(i).begin());
  }
  rows.check_finite();
  return Memory::from_parts(records_from(corpus), l2_normalize(rows), corpus.normals.size(),
                            alpha);
}

Memory build_memory(const Corpus& corpus, const EmbeddingMatrix& caption_embeddings,
                    float alpha) {
  validate_alpha(alpha);
  check_buildable(corpus);
  if (caption_embeddings.rows() != corpus.size()) {
    throw Error(ErrorCategory::kValidation,
                "corpus has " + std::to_string(corpus.size()) + " captions but embeddings have " +
                    std::to_string(caption_embeddings.rows()) + " rows");
  }
  return Memory::from_parts(records_from(corpus), l2_normalize(caption_embeddings),
                            corpus.normals.size(), alpha);
}

void save_memory(const Memory& memory, const std::filesystem::path& path) {
  io::write_file_atomic(path, [&](std::ostream& out) {
    io::BinaryWriter w(out);
    w.bytes(std::as_bytes(std::span(kMagic)));
    w.u32(kMemoryFormatVersion);
    w.u32(static_cast<std::uint32_t>(memory.dim()));
    w.u64(memory.n_normal());
    w.u64(memory.n_anomalous());
    w.f32(memory.alpha());
    w.u8(memory.normalized() ? 1 : 0);
    for (const auto& rec : memory.captions()) {
      w.string(rec.text);
      w.string(rec.category);
      w.u8(static_cast<std::uint8_t>(rec.flag));
    }
    // Inline FBEM block, hashed through the same writer.
    const auto& m = memory.embeddings();
    w.bytes(std::as_bytes(std::span("FBEM", 4)));
    w.u32(kEmbeddingFormatVersion);
    w.u32(static_cast<std::uint32_t>(m.dim()));
    w.u64(m.rows());
    w.floats(m.data());
    const std::uint64_t checksum = w.checksum();
    w.u64(checksum);
  });
}

namespace {

void verify_checksum(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCategory::kIo, "cannot stat " + path.string());
  if (size < 8) throw Error(ErrorCategory::kCorruption, path.string() + ": truncated");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  io::Fnv1a64 hash;
  std::vector<std::byte> buf(1 << 20);
  std::uint64_t remaining = size - 8;
  while (remaining > 0) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, buf.size()));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      throw Error(ErrorCategory::kCorruption, path.string() + ": short read");
    }
    hash.update(std::span(buf.data(), n));
    remaining -= n;
  }
  io::BinaryReader tail(in, path.string());
  if (tail.u64() != hash.value()) {
    throw Error(ErrorCategory::kCorruption, path.string() + ": checksum mismatch");
  }
}

Memory parse_memory(std::istream& in, const std::string& ctx) {
  io::BinaryReader r(in, ctx);
  std::array<std::byte, 8> prefix{};  // magic + version, already checked
  r.bytes(prefix);
  const std::uint32_t dim = r.u32();
  const std::uint64_t n_normal = r.u64();
  const std::uint64_t n_anomalous = r.u64();
  const float alpha = r.f32();
  const std::uint8_t normalized = r.u8();
  const std::uint64_t n = n_normal + n_anomalous;
  if (dim == 0 || n > (std::uint64_t{1} << 36)) {
    throw Error(ErrorCategory::kConsistency, ctx + ": implausible header");
  }

  std::vector<CaptionRecord> captions;
  captions.reserve(static_cast<std::size_t>(n));
  bool flags_consistent = true;
  for (std::uint64_t i = 0; i < n; ++i) {
    CaptionRecord rec;
    rec.text = r.string();
    rec.category = r.string();
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw Error(ErrorCategory::kConsistency, ctx + ": invalid flag byte");
    rec.flag = static_cast<Flag>(flag);
    rec.corpus_index = static_cast<std::size_t>(i);
    if ((i < n_normal) != (rec.flag == Flag::kNormal)) flags_consistent = false;
    captions.push_back(std::move(rec));
  }

  std::array<char, 4> block_magic{};
  r.bytes(std::as_writable_bytes(std::span(block_magic)));
  if (std::string_view(block_magic.data(), 4) != "FBEM") {
    throw Error(ErrorCategory::kConsistency,
                ctx + ": caption table does not match the header count of " + std::to_string(n));
  }
  const std::uint32_t block_version = r.u32();
  const std::uint32_t block_dim = r.u32();
  const std::uint64_t block_rows = r.u64();
  if (block_version != kEmbeddingFormatVersion || block_dim == 0 ||
      block_rows > (std::uint64_t{1} << 40) / block_dim) {
    throw Error(ErrorCategory::kConsistency, ctx + ": invalid embedding block header");
  }
  if (block_rows != n || block_dim != dim) {
    throw Error(ErrorCategory::kConsistency,
                ctx + ": header declares " + std::to_string(n) + "x" + std::to_string(dim) +
                    " but embedding block is " + std::to_string(block_rows) + "x" +
                    std::to_string(block_dim));
  }
  if (!flags_consistent) {
    throw Error(ErrorCategory::kConsistency,
                ctx + ": caption flags disagree with the header class counts");
  }
  std::vector<float> data(static_cast<std::size_t>(block_rows) * block_dim);
  r.floats(data);
  r.u64();  // checksum, verified up front
  if (!r.at_end()) throw Error(ErrorCategory::kConsistency, ctx + ": trailing bytes");

  EmbeddingMatrix rows(static_cast<std::size_t>(block_rows), block_dim, std::move(data));
  if (normalized == 0) rows = l2_normalize(rows);
  return Memory::from_parts(std::move(captions), std::move(rows),
                            static_cast<std::size_t>(n_normal), alpha);
}

}  // namespace

Memory load_memory(const std::filesystem::path& path) {
  const std::string ctx = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + ctx);
  {
    io::BinaryReader r(in, ctx);
    std::array<char, 4> magic{};
    r.bytes(std::as_writable_bytes(std::span(magic)));
    if (magic != kMagic) throw Error(ErrorCategory::kFormat, ctx + ": not a memory file");
    const std::uint32_t version = r.u32();
    if (version != kMemoryFormatVersion) {
      throw Error(ErrorCategory::kVersion,
                  ctx + ": memory format version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kMemoryFormatVersion) +
                      "); rebuild or upgrade the file");
    }
  }
  verify_checksum(path);
  in.seekg(0);
  // The checksum matched, so any structural problem below was written that
  // way: report it as an internal inconsistency rather than corruption.
  try {
    return parse_memory(in, ctx);
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::kCorruption) {
      throw Error(ErrorCategory::kConsistency, e.what());
    }
    throw;
  }
}

double centroid_angle(const EmbeddingMatrix& rows, std::size_t n_normal) {
  if (n_normal == 0 || n_normal >= rows.rows()) {
    throw Error(ErrorCategory::kValidation, "centroid angle needs both classes non-empty");
  }
  std::vector<double> normal(rows.dim(), 0.0);
  std::vector<double> anomalous(rows.dim(), 0.0);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto& acc = i < n_normal ? normal : anomalous;
    const auto r = rows.row(i);
    for (std::size_t d = 0; d < r.size(); ++d) acc[d] += r[d];
  }
  const double nn = static_cast<double>(n_normal);
  const double na = static_cast<double>(rows.rows() - n_normal);
  for (double& v : normal) v /= nn;
  for (double& v : anomalous) v /= na;
  return angle_degrees(normal, anomalous);
}

double centroid_angle(const Memory& memory) {
  return centroid_angle(memory.embeddings(), memory.n_normal());
}

}  // namespace memvad
