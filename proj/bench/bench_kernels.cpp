// OpenMP kernels against their serial references at parser-sized shapes.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "jsee/kernels.hpp"
#include "jsee/matrix.hpp"

namespace {

using jsee::Matrix;
namespace k = jsee::kernels;

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Matrix m(r, c);
  for (double& v : m.values()) v = d(rng);
  return m;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(n, 256, rng), b = random_matrix(256, 256, rng);
  Matrix c;
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::gemm(a, k::Trans::No, b, k::Trans::No, c);
    } else {
      k::serial::gemm(a, k::Trans::No, b, k::Trans::No, c);
    }
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 256 * 256));
}

// Edge label scoring: N nodes, 64-wide projections, 42 channels.
template <bool Parallel>
void BM_biaffine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64, channels = 42;
  std::mt19937_64 rng(2);
  const Matrix x1 = random_matrix(n, d, rng), x2 = random_matrix(n, d, rng);
  const Matrix u = random_matrix(d, channels * d, rng), w = random_matrix(channels, 2 * d, rng);
  const std::vector<double> bias(channels, 0.1);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::biaffine_forward(x1, x2, u, w, bias, channels, out);
    } else {
      k::serial::biaffine_forward(x1, x2, u, w, bias, channels, out);
    }
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <bool Parallel>
void BM_biaffine_backward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64, channels = 42;
  std::mt19937_64 rng(3);
  const Matrix x1 = random_matrix(n, d, rng), x2 = random_matrix(n, d, rng);
  const Matrix u = random_matrix(d, channels * d, rng), w = random_matrix(channels, 2 * d, rng);
  const Matrix g = random_matrix(n, n * channels, rng);
  Matrix gx1(n, d), gx2(n, d), gu(d, channels * d), gw(channels, 2 * d);
  std::vector<double> gb(channels);
  for (auto _ : state) {
    const k::BiaffineGrads sinks{&gx1, &gx2, &gu, &gw, gb};
    if constexpr (Parallel) {
      k::biaffine_backward(g, x1, x2, u, w, channels, sinks);
    } else {
      k::serial::biaffine_backward(g, x1, x2, u, w, channels, sinks);
    }
    benchmark::DoNotOptimize(gu.values().data());
  }
}

// Subword pooling: T tokens of two pieces each, 3 layers of width 256.
template <bool Parallel>
void BM_pool(benchmark::State& state) {
  const auto tokens = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::vector<std::vector<int>> alignment(tokens);
  for (std::size_t t = 0; t < tokens; ++t) {
    alignment[t] = {static_cast<int>(2 * t), static_cast<int>(2 * t + 1)};
  }
  std::vector<Matrix> layers;
  for (int l = 0; l < 3; ++l) layers.push_back(random_matrix(2 * tokens, 256, rng));
  const std::vector<double> probs = {0.2, 0.3, 0.5};
  const Matrix score = random_matrix(1, 256, rng);
  Matrix out, mixed;
  std::vector<double> alpha;
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::pool_forward(layers, alignment, probs, score.values(), out, mixed, alpha);
    } else {
      k::serial::pool_forward(layers, alignment, probs, score.values(), out, mixed, alpha);
    }
    benchmark::DoNotOptimize(out.values().data());
  }
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_gemm<true>)->Name("gemm/openmp")->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_biaffine<false>)->Name("biaffine/serial")->Arg(16)->Arg(48);
BENCHMARK(BM_biaffine<true>)->Name("biaffine/openmp")->Arg(16)->Arg(48);
BENCHMARK(BM_biaffine_backward<false>)->Name("biaffine_backward/serial")->Arg(16)->Arg(48);
BENCHMARK(BM_biaffine_backward<true>)->Name("biaffine_backward/openmp")->Arg(16)->Arg(48);
BENCHMARK(BM_pool<false>)->Name("pool/serial")->Arg(32)->Arg(128);
BENCHMARK(BM_pool<true>)->Name("pool/openmp")->Arg(32)->Arg(128);

BENCHMARK_MAIN();
