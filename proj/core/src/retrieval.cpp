#include "memvad/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace memvad {
namespace {

constexpr std::size_t kLanes = 16;
// Below this many rows a single worker is faster than spawning threads.
constexpr std::size_t kMinRowsPerWorker = 8192;

bool better(const RankedIndex& a, const RankedIndex& b) noexcept {
  return a.similarity > b.similarity || (a.similarity == b.similarity && a.index < b.index);
}

/// Bounded heap holding the best `k` candidates; the worst sits on top.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(std::size_t index, float similarity) {
    const RankedIndex candidate{index, similarity};
    if (heap_.size() < k_) {
      heap_.push_back(candidate);
      std::push_heap(heap_.begin(), heap_.end(), better);
      return;
    }
    if (!better(candidate, heap_.front())) return;
    std::pop_heap(heap_.begin(), heap_.end(), better);
    heap_.back() = candidate;
    std::push_heap(heap_.begin(), heap_.end(), better);
  }

  std::vector<RankedIndex> take() && { return std::move(heap_); }

 private:
  std::size_t k_;
  std::vector<RankedIndex> heap_;
};

std::vector<RankedIndex> finish(std::vector<RankedIndex> candidates, std::size_t k) {
  std::sort(candidates.begin(), candidates.end(), better);
  if (candidates.size() > k) candidates.resize(k);
  return candidates;
}

void scan_range(const Memory& memory, std::span<const float> query, float alpha,
                std::size_t begin, std::size_t end, TopK& top) {
  const std::size_t boundary = std::clamp(memory.n_normal(), begin, end);
  for (std::size_t j = begin; j < boundary; ++j) top.offer(j, dot_product(query, memory.row(j)));
  for (std::size_t j = boundary; j < end; ++j) {
    top.offer(j, alpha * dot_product(query, memory.row(j)));
  }
}

void check_query_dim(const Memory& memory, std::span<const float> query) {
  if (query.size() != memory.dim()) {
    throw Error(ErrorCategory::kQuery, "query dim " + std::to_string(query.size()) +
                                           " does not match memory dim " +
                                           std::to_string(memory.dim()));
  }
  if (memory.size() == 0) throw Error(ErrorCategory::kQuery, "memory is empty");
}

template <typename Fn>
void parallel_for(std::size_t workers, Fn&& fn) {
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back([&fn, w] { fn(w); });
  fn(0);
}

}  // namespace

float dot_product(std::span<const float> a, std::span<const float> b) noexcept {
  const float* pa = a.data();
  const float* pb = b.data();
  const std::size_t n = a.size();
  float acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += pa[i + l] * pb[i + l];
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += pa[i] * pb[i];
  for (std::size_t width = kLanes / 2; width > 0; width /= 2) {
    for (std::size_t l = 0; l < width; ++l) acc[l] += acc[l + width];
  }
  return acc[0] + tail;
}

SegmentQuery make_query(std::vector<float> embedding, double start_time, double end_time,
                        std::size_t segment_index) {
  l2_normalize_in_place(embedding, segment_index);
  SegmentQuery q;
  q.embedding = std::move(embedding);
  q.start_time = start_time;
  q.end_time = end_time;
  q.segment_index = segment_index;
  return q;
}

void RetrievalConfig::validate() const {
  if (top_k == 0) throw Error(ErrorCategory::kConfig, "top_k must be at least 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCategory::kConfig, "temperature must be positive");
  }
  if (alpha_override) validate_alpha(*alpha_override);
  if (threads == 0) throw Error(ErrorCategory::kConfig, "threads must be at least 1");
}

float RetrievalConfig::effective_alpha(const Memory& memory) const {
  if (!penalize) return 1.0f;
  return alpha_override.value_or(memory.alpha());
}

std::vector<float> penalized_similarities(const Memory& memory, std::span<const float> query,
                                          const RetrievalConfig& config) {
  check_query_dim(memory, query);
  const float alpha = config.effective_alpha(memory);
  std::vector<float> sims(memory.size());
  for (std::size_t j = 0; j < memory.size(); ++j) {
    const float s = dot_product(query, memory.row(j));
    sims[j] = j < memory.n_normal() ? s : alpha * s;
  }
  return sims;
}

std::vector<RankedIndex> top_k_select(std::span<const float> similarities, std::size_t top_k) {
  if (top_k == 0) throw Error(ErrorCategory::kConfig, "top_k must be at least 1");
  if (similarities.empty()) throw Error(ErrorCategory::kQuery, "memory is empty");
  TopK top(std::min(top_k, similarities.size()));
  for (std::size_t j = 0; j < similarities.size(); ++j) top.offer(j, similarities[j]);
  return finish(std::move(top).take(), top_k);
}

std::vector<RankedIndex> retrieve_top_k(const Memory& memory, std::span<const float> query,
                                        const RetrievalConfig& config) {
  config.validate();
  check_query_dim(memory, query);
  const float alpha = config.effective_alpha(memory);
  const std::size_t k = std::min(config.top_k, memory.size());
  const std::size_t n = memory.size();
  const std::size_t workers =
      std::clamp<std::size_t>(n / kMinRowsPerWorker, 1, config.threads);
  if (workers == 1) {
    TopK top(k);
    scan_range(memory, query, alpha, 0, n, top);
    return finish(std::move(top).take(), k);
  }
  std::vector<std::vector<RankedIndex>> partial(workers);
  parallel_for(workers, [&](std::size_t w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    TopK top(k);
    scan_range(memory, query, alpha, begin, end, top);
    partial[w] = std::move(top).take();
  });
  std::vector<RankedIndex> merged;
  merged.reserve(k * workers);
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  return finish(std::move(merged), k);
}

std::vector<double> softmax_weights(std::span<const RankedIndex> ranked, double temperature) {
  std::vector<double> w(ranked.size());
  if (ranked.empty()) return w;
  double max_logit = -INFINITY;
  for (const auto& r : ranked) max_logit = std::max(max_logit, r.similarity / temperature);
  double total = 0.0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    w[k] = std::exp(ranked[k].similarity / temperature - max_logit);
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

SegmentVerdict score_segment(const Memory& memory, const SegmentQuery& query,
                             const RetrievalConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  if (!(query.end_time > query.start_time)) {
    throw Error(ErrorCategory::kQuery,
                "segment " + std::to_string(query.segment_index) + " has an empty span");
  }
  check_query_dim(memory, query.embedding);
  for (float x : query.embedding) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCategory::kQuery,
                  "segment " + std::to_string(query.segment_index) + " embedding is not finite");
    }
  }
  if (std::abs(l2_norm(query.embedding) - 1.0) > 1e-5) {
    throw Error(ErrorCategory::kQuery,
                "segment " + std::to_string(query.segment_index) + " embedding is not unit norm");
  }

  const auto ranked = retrieve_top_k(memory, query.embedding, config);
  const auto weights = softmax_weights(ranked, config.temperature);

  SegmentVerdict v;
  v.segment_index = query.segment_index;
  v.start_time = query.start_time;
  v.end_time = query.end_time;
  v.matches.reserve(ranked.size());
  double score = 0.0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& rec = memory.captions()[ranked[k].index];
    const Flag flag = memory.flag(ranked[k].index);
    if (flag == Flag::kAnomalous) score += weights[k];
    v.matches.push_back(
        {ranked[k].index, weights[k], flag, rec.text, rec.category, ranked[k].similarity});
  }
  v.score = std::clamp(score, 0.0, 1.0);
  v.processing_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return v;
}

std::vector<BatchEntry> score_batch(const Memory& memory, std::span<const SegmentQuery> queries,
                                    const RetrievalConfig& config, bool fail_fast) {
  config.validate();
  std::vector<BatchEntry> out(queries.size());
  if (queries.empty()) return out;

  // Parallelise across queries; each query scans sequentially so the
  // verdicts match the single-threaded path exactly.
  RetrievalConfig per_query = config;
  per_query.threads = 1;
  const std::size_t workers = std::min(config.threads, queries.size());
  std::atomic<std::size_t> next{0};
  parallel_for(workers, [&](std::size_t) {
    for (std::size_t i = next++; i < queries.size(); i = next++) {
      try {
        out[i].verdict = score_segment(memory, queries[i], per_query);
      } catch (const Error& e) {
        out[i].error = e;
      }
    }
  });
  if (fail_fast) {
    for (const auto& entry : out) {
      if (entry.error) throw *entry.error;
    }
  }
  return out;
}

}  // namespace memvad
