#include "memvad/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "memvad/error.hpp"
#include "rng.hpp"

namespace memvad {

std::vector<EvalVideo> generate_synthetic_videos(const Corpus& corpus, const TextEmbedder& embedder,
                                                 const SyntheticVideoOptions& options) {
  if (corpus.normals.empty() || corpus.anomalies.empty()) {
    throw Error(ErrorCategory::kConfig, "synthetic videos need both caption classes");
  }
  if (!(options.duration > 0.0) || !(options.video_fps > 0.0) || !(options.scene_seconds > 0.0)) {
    throw Error(ErrorCategory::kConfig, "duration, fps and scene length must be positive");
  }
  if (!(options.anomaly_fraction > 0.0 && options.anomaly_fraction < 1.0)) {
    throw Error(ErrorCategory::kConfig, "anomaly_fraction must lie in (0, 1)");
  }
  if (!(options.noise >= 0.0)) throw Error(ErrorCategory::kConfig, "noise must be non-negative");

  const std::size_t dim = embedder.dim();
  std::unordered_map<std::size_t, std::vector<float>> cache;
  auto scene_embedding = [&](std::size_t row) -> const std::vector<float>& {
    auto it = cache.find(row);
    if (it != cache.end()) return it->second;
    const RawCaption& src = corpus.at(row).source;
    return cache.emplace(row, embedder.embed(src.category + " " + src.description)).first->second;
  };

  const auto frame_count =
      static_cast<std::size_t>(std::floor(options.duration * options.video_fps + 0.5));
  const auto anomaly_frames = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(frame_count) *
                                             options.anomaly_fraction)));
  const double noise_scale = options.noise / std::sqrt(static_cast<double>(dim));

  std::vector<EvalVideo> videos;
  for (std::size_t v = 0; v < options.videos; ++v) {
    detail::SplitMix64 rng(detail::mix64(options.seed, 0x766964656fULL + v));
    EvalVideo video;
    char id[32];
    std::snprintf(id, sizeof id, "synthetic_%03zu", v);
    video.truth.video_id = id;
    video.truth.frame_count = frame_count;
    const std::size_t a_start = rng.below(frame_count - anomaly_frames + 1);
    video.truth.intervals.push_back({a_start, a_start + anomaly_frames});

    std::size_t scene = static_cast<std::size_t>(-1);
    std::size_t normal_row = 0;
    std::size_t anomalous_row = 0;
    for (std::size_t t = 0; t < frame_count; ++t) {
      const double time = static_cast<double>(t) / options.video_fps;
      const auto current = static_cast<std::size_t>(std::floor(time / options.scene_seconds));
      if (current != scene) {
        scene = current;
        normal_row = rng.below(corpus.normals.size());
        anomalous_row = corpus.normals.size() + rng.below(corpus.anomalies.size());
      }
      const bool anomalous = t >= a_start && t < a_start + anomaly_frames;
      const auto& base = scene_embedding(anomalous ? anomalous_row : normal_row);
      TimedFeature f;
      f.start_time = time;
      f.end_time = static_cast<double>(t + 1) / options.video_fps;
      f.feature.resize(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        f.feature[d] = static_cast<float>(base[d] + noise_scale * rng.gaussian());
      }
      video.stream.frames.push_back(std::move(f));
    }
    videos.push_back(std::move(video));
  }
  return videos;
}

Memory random_memory(std::size_t rows, std::size_t dim, double anomalous_share,
                     std::uint64_t seed, float alpha) {
  if (rows == 0 || dim == 0) throw Error(ErrorCategory::kConfig, "rows and dim must be positive");
  if (!(anomalous_share >= 0.0 && anomalous_share <= 1.0)) {
    throw Error(ErrorCategory::kConfig, "anomalous_share must lie in [0, 1]");
  }
  const auto n_anomalous =
      static_cast<std::size_t>(std::llround(static_cast<double>(rows) * anomalous_share));
  const std::size_t n_normal = rows - n_anomalous;

  EmbeddingMatrix m(rows, dim);
  detail::SplitMix64 rng(detail::mix64(seed, 0x72616e646f6dULL));
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = m.row(i);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : row) {
        x = static_cast<float>(2.0 * rng.uniform() - 1.0);
        norm += static_cast<double>(x) * x;
      }
    } while (norm == 0.0);
    const auto inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (auto& x : row) x *= inv;
  }
  std::vector<CaptionRecord> captions(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    captions[i].flag = i < n_normal ? Flag::kNormal : Flag::kAnomalous;
    captions[i].corpus_index = i;
  }
  return Memory::from_parts(std::move(captions), std::move(m), n_normal, alpha);
}

}  // namespace memvad
