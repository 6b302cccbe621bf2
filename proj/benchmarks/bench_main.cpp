#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "memvad/embedding.hpp"
#include "memvad/evaluation.hpp"
#include "memvad/retrieval.hpp"
#include "memvad/synthetic.hpp"
#include "memvad/temporal.hpp"

namespace {

using namespace memvad;

/// Retrieval-only latency for one segment against a random memory.
void BM_RetrieveTopK(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const Memory memory = random_memory(rows, dim, 0.5, 1);
  RetrievalConfig cfg;
  std::uint64_t i = 0;
  for (auto _ : state) {
    const auto q = random_unit_vector(dim, 2, i++ % 64);
    benchmark::DoNotOptimize(retrieve_top_k(memory, q, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(rows * dim * sizeof(float)));
}
BENCHMARK(BM_RetrieveTopK)
    ->ArgsProduct({{20'000, 100'000, 200'000}, {256, 1024}})
    ->Unit(benchmark::kMillisecond);

void BM_ScoreSegment(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const Memory memory = random_memory(rows, 1024, 0.5, 1);
  const auto q = make_query(random_unit_vector(1024, 3, 0), 0.0, 1.0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(score_segment(memory, q));
}
BENCHMARK(BM_ScoreSegment)->Arg(20'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_TopKSelect(benchmark::State& state) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> sims(static_cast<std::size_t>(state.range(0)));
  for (auto& s : sims) s = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(top_k_select(sims, 10));
}
BENCHMARK(BM_TopKSelect)->Range(1 << 12, 1 << 21);

void BM_GaussianSmooth(benchmark::State& state) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = u(rng);
  SmoothingConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_smooth(x, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GaussianSmooth)->Range(1 << 10, 1 << 18);

void BM_Metrics(benchmark::State& state) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = u(rng);
    y[i] = u(rng) < 0.2;
  }
  y[0] = 1;
  y[1] = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(roc_auc(s, y));
    benchmark::DoNotOptimize(average_precision(s, y));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Metrics)->Range(1 << 10, 1 << 20);

}  // namespace

BENCHMARK_MAIN();
