#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>

namespace memvad::io {

/// Streaming 64-bit FNV-1a. Used as the trailing content checksum of
/// memory files.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void update(std::span<const std::byte> bytes) noexcept;
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept;

/// Little-endian writer that hashes everything it emits.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(std::span<const std::byte> data);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void floats(std::span<const float> values);
  /// u32 length prefix followed by the raw UTF-8 bytes.
  void string(const std::string& s);

  std::uint64_t checksum() const noexcept { return hash_.value(); }

 private:
  std::ostream& out_;
  Fnv1a64 hash_;
};

/// Little-endian reader; short reads raise a corruption error naming
/// `context`.
class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string context)
      : in_(in), context_(std::move(context)) {}

  void bytes(std::span<std::byte> data);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  void floats(std::span<float> out);
  std::string string(std::uint32_t max_length = 1U << 26);

  /// True when the underlying stream has no more bytes.
  bool at_end();

  std::uint64_t checksum() const noexcept { return hash_.value(); }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::istream& in_;
  std::string context_;
  Fnv1a64 hash_;
  std::uint64_t offset_ = 0;
};

/// Writes through a temporary sibling file and renames it over `path` only
/// after `body` returns and the stream flushed cleanly. On any failure the
/// temporary is removed and `path` is left untouched.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& body);

/// Reads a whole file as text; missing files raise an I/O error.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace memvad::io
