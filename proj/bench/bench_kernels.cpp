// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to compare
// thread counts; the serial variants ignore it.

#include <benchmark/benchmark.h>

#include <random>

#include "hallucheck/kernels.hpp"

using namespace hallucheck::kernels;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (auto& x : m.data) x = g(rng);
  return m;
}

// Output triples x samples, 384-wide embeddings, 8 triples per sample.
struct SimilarityCase {
  Matrix output;
  std::vector<Matrix> samples;

  explicit SimilarityCase(std::size_t triples, std::size_t n_samples) {
    std::mt19937_64 rng(1);
    output = random_matrix(rng, triples, 384);
    for (std::size_t k = 0; k < n_samples; ++k) samples.push_back(random_matrix(rng, 8, 384));
  }
};

template <auto Kernel>
void BM_MaxThenMean(benchmark::State& state) {
  const SimilarityCase c(static_cast<std::size_t>(state.range(0)), 20);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(c.output, c.samples));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 20 * 8);
}

template <auto Kernel>
void BM_ThresholdSweep(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<std::uint8_t> hal(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u(rng);
    hal[i] = u(rng) < 0.5;
  }
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(scores, hal, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_Bootstrap(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  std::vector<double> values(static_cast<std::size_t>(state.range(0)));
  for (auto& v : values) v = u(rng);
  const IndexMetric mean = [&](std::span<const std::size_t> idx) {
    double s = 0;
    for (auto i : idx) s += values[i];
    return s / static_cast<double>(idx.size());
  };
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(values.size(), 1000, 42, mean));
}

}  // namespace

BENCHMARK(BM_MaxThenMean<max_then_mean_serial>)->Name("max_then_mean/serial")->Arg(8)->Arg(64);
BENCHMARK(BM_MaxThenMean<max_then_mean_parallel>)->Name("max_then_mean/parallel")->Arg(8)->Arg(64)->UseRealTime();
BENCHMARK(BM_ThresholdSweep<threshold_sweep_serial>)->Name("threshold_sweep/serial")->Arg(501)->Arg(100000);
BENCHMARK(BM_ThresholdSweep<threshold_sweep_parallel>)
    ->Name("threshold_sweep/parallel")
    ->Arg(501)
    ->Arg(100000)
    ->UseRealTime();
BENCHMARK(BM_Bootstrap<bootstrap_replicates_serial>)->Name("bootstrap/serial")->Arg(501);
BENCHMARK(BM_Bootstrap<bootstrap_replicates_parallel>)->Name("bootstrap/parallel")->Arg(501)->UseRealTime();

BENCHMARK_MAIN();
