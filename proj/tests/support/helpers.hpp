#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "memvad/memory_store.hpp"

namespace memvad::testing {

/// Memory from explicit rows; the first n_normal rows are normal. Rows are
/// stored exactly as given, so they must already be unit norm.
inline Memory memory_from_rows(const std::vector<std::vector<double>>& rows, std::size_t n_normal,
                               float alpha = kDefaultAlpha) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  EmbeddingMatrix m(rows.size(), dim);
  std::vector<CaptionRecord> captions(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) m.row(i)[d] = static_cast<float>(rows[i][d]);
    captions[i].text = "caption " + std::to_string(i);
    captions[i].category = i < n_normal ? "normal" : "anomalous";
    captions[i].flag = i < n_normal ? Flag::kNormal : Flag::kAnomalous;
    captions[i].corpus_index = i;
  }
  return Memory::from_parts(std::move(captions), std::move(m), n_normal, alpha);
}

/// Float rows of `memory` widened to double (what the memory actually holds).
inline std::vector<std::vector<double>> rows_of(const Memory& memory) {
  std::vector<std::vector<double>> out(memory.size(), std::vector<double>(memory.dim()));
  for (std::size_t i = 0; i < memory.size(); ++i) {
    for (std::size_t d = 0; d < memory.dim(); ++d) out[i][d] = memory.row(i)[d];
  }
  return out;
}

inline std::vector<int> flags_of(const Memory& memory) {
  std::vector<int> f(memory.size());
  for (std::size_t i = 0; i < memory.size(); ++i) f[i] = memory.flag(i) == Flag::kAnomalous;
  return f;
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("memvad_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace memvad::testing
