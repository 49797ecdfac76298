// Serial reference kernels against their OpenMP versions.
//
//   ./bench_kernels --benchmark_filter=Cosine

#include <benchmark/benchmark.h>

#include "fedrep/kernels.hpp"
#include "fedrep/rng.hpp"

namespace {

using namespace fedrep;

Mat input(std::int64_t rows, std::int64_t cols, std::uint64_t salt) {
  RngStream rng(42, salt);
  return gaussian_matrix(rng, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
}

template <Mat (*Fn)(const Mat&, const Mat&)>
void pairwise(benchmark::State& state) {
  const Mat x = input(state.range(0), 64, 1), y = input(state.range(0), 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, y));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <Mat (*Fn)(const Mat&)>
void unary(benchmark::State& state) {
  const Mat x = input(state.range(0), 128, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Mat (*Fn)(const Mat&, double, double)>
void apply_q(benchmark::State& state) {
  const Mat pi = input(state.range(0), state.range(0), 4).cwiseAbs();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pi, 0.8, 0.8));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

}  // namespace

BENCHMARK(pairwise<kernels::reference::pairwise_sq_dist>)->Name("PairwiseSqDist/reference")->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(pairwise<kernels::pairwise_sq_dist>)->Name("PairwiseSqDist/openmp")->RangeMultiplier(4)->Range(64, 1024)->UseRealTime();
BENCHMARK(pairwise<kernels::reference::cosine_similarity>)->Name("Cosine/reference")->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(pairwise<kernels::cosine_similarity>)->Name("Cosine/openmp")->RangeMultiplier(4)->Range(64, 1024)->UseRealTime();
BENCHMARK(unary<kernels::reference::gram>)->Name("Gram/reference")->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(unary<kernels::gram>)->Name("Gram/openmp")->RangeMultiplier(4)->Range(64, 1024)->UseRealTime();
BENCHMARK(unary<kernels::reference::covariance>)->Name("Covariance/reference")->RangeMultiplier(4)->Range(256, 4096);
BENCHMARK(unary<kernels::covariance>)->Name("Covariance/openmp")->RangeMultiplier(4)->Range(256, 4096)->UseRealTime();
BENCHMARK(apply_q<kernels::reference::apply_q>)->Name("ApplyQ/reference")->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(apply_q<kernels::apply_q>)->Name("ApplyQ/openmp")->RangeMultiplier(4)->Range(64, 1024)->UseRealTime();

BENCHMARK_MAIN();
