#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "memvad/corpus.hpp"
#include "memvad/embedding.hpp"
#include "memvad/evaluation.hpp"
#include "memvad/memory_store.hpp"

namespace memvad {

struct SyntheticVideoOptions {
  std::size_t videos = 4;
  double duration = 60.0;
  double video_fps = 30.0;
  /// Share of each video covered by its single anomalous interval.
  double anomaly_fraction = 0.25;
  /// Per-dimension noise scale relative to a unit feature.
  double noise = 0.5;
  /// Seconds between scene changes (a new caption is drawn each time).
  double scene_seconds = 1.0;
  std::uint64_t seed = 0;
};

/// Frame-feature videos whose scenes are drawn from the corpus's raw
/// descriptions: frames inside the anomalous interval show anomalous scenes,
/// all others normal ones. Each frame feature is the scene's text embedding
/// plus Gaussian noise. Ground truth marks the anomalous interval.
std::vector<EvalVideo> generate_synthetic_videos(const Corpus& corpus, const TextEmbedder& embedder,
                                                 const SyntheticVideoOptions& options = {});

/// Memory of `rows` random unit rows for latency work. Components are
/// uniform in [-1, 1) before normalisation; caption texts are empty. The last
/// round(rows * anomalous_share) rows are anomalous.
Memory random_memory(std::size_t rows, std::size_t dim, double anomalous_share,
                     std::uint64_t seed, float alpha = kDefaultAlpha);

}  // namespace memvad
