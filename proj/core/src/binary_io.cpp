#include "memvad/binary_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <unistd.h>

#include "memvad/error.hpp"

namespace memvad {

std::string_view to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kParse: return "parse";
    case ErrorCategory::kValidation: return "validation";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kCorruption: return "corruption";
    case ErrorCategory::kConsistency: return "consistency";
    case ErrorCategory::kVersion: return "version";
    case ErrorCategory::kDegenerate: return "degenerate";
    case ErrorCategory::kQuery: return "query";
    case ErrorCategory::kStream: return "stream";
    case ErrorCategory::kUndefinedMetric: return "undefined_metric";
  }
  return "unknown";
}

}  // namespace memvad

namespace memvad::io {
namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian targets are not supported");

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<std::byte, sizeof(T)> raw;
    std::memcpy(raw.data(), &value, sizeof(T));
    std::reverse(raw.begin(), raw.end());
    std::memcpy(&value, raw.data(), sizeof(T));
  }
  return value;
}

template <typename T>
void put(BinaryWriter& w, T value) {
  value = byteswap_if_big(value);
  std::array<std::byte, sizeof(T)> raw;
  std::memcpy(raw.data(), &value, sizeof(T));
  w.bytes(raw);
}

template <typename T>
T get(BinaryReader& r) {
  std::array<std::byte, sizeof(T)> raw;
  r.bytes(raw);
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return byteswap_if_big(value);
}

constexpr std::size_t kChunkFloats = 1 << 16;

}  // namespace

void Fnv1a64::update(std::span<const std::byte> bytes) noexcept {
  std::uint64_t h = state_;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= kPrime;
  }
  state_ = h;
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept {
  Fnv1a64 h;
  h.update(bytes);
  return h.value();
}

void BinaryWriter::bytes(std::span<const std::byte> data) {
  out_.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size()));
  if (!out_) throw Error(ErrorCategory::kIo, "write failed");
  hash_.update(data);
}

void BinaryWriter::u8(std::uint8_t v) { put(*this, v); }
void BinaryWriter::u32(std::uint32_t v) { put(*this, v); }
void BinaryWriter::u64(std::uint64_t v) { put(*this, v); }
void BinaryWriter::f32(float v) { put(*this, v); }
void BinaryWriter::f64(double v) { put(*this, v); }

void BinaryWriter::floats(std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    bytes(std::as_bytes(values));
  } else {
    for (float v : values) f32(v);
  }
}

void BinaryWriter::string(const std::string& s) {
  if (s.size() > UINT32_MAX) throw Error(ErrorCategory::kFormat, "string too long");
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(std::as_bytes(std::span(s.data(), s.size())));
}

void BinaryReader::bytes(std::span<std::byte> data) {
  in_.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got != data.size()) {
    throw Error(ErrorCategory::kCorruption,
                context_ + ": truncated at byte offset " + std::to_string(offset_ + got));
  }
  hash_.update(data);
  offset_ += got;
}

std::uint8_t BinaryReader::u8() { return get<std::uint8_t>(*this); }
std::uint32_t BinaryReader::u32() { return get<std::uint32_t>(*this); }
std::uint64_t BinaryReader::u64() { return get<std::uint64_t>(*this); }
float BinaryReader::f32() { return get<float>(*this); }
double BinaryReader::f64() { return get<double>(*this); }

void BinaryReader::floats(std::span<float> out) {
  for (std::size_t begin = 0; begin < out.size(); begin += kChunkFloats) {
    const std::size_t n = std::min(kChunkFloats, out.size() - begin);
    auto chunk = out.subspan(begin, n);
    bytes(std::as_writable_bytes(chunk));
    if constexpr (std::endian::native == std::endian::big) {
      for (float& v : chunk) v = byteswap_if_big(v);
    }
  }
}

std::string BinaryReader::string(std::uint32_t max_length) {
  const std::uint32_t n = u32();
  if (n > max_length) {
    throw Error(ErrorCategory::kCorruption,
                context_ + ": implausible string length " + std::to_string(n));
  }
  std::string s(n, '\0');
  bytes(std::as_writable_bytes(std::span(s.data(), s.size())));
  return s;
}

bool BinaryReader::at_end() {
  return in_.peek() == std::char_traits<char>::eof();
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& body) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCategory::kIo, "cannot open " + tmp.string() + " for writing");
      body(out);
      out.flush();
      if (!out) throw Error(ErrorCategory::kIo, "write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace memvad::io
