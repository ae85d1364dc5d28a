// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "schemex/kernels.hpp"

namespace k = schemex::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> out(n);
  for (double& x : out) x = nd(rng);
  return out;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64;
  const auto a = random_values(m * d, 1);
  const auto b = random_values(d * d, 2);
  std::vector<double> c(m * d);
  for (auto _ : state) {
    Kernel(a, b, c, m, d, d, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * d * d));
}

template <auto Kernel>
void bm_attention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const k::AttentionShape shape{len, 64, 4};
  const auto q = random_values(len * 64, 3);
  const auto kk = random_values(len * 64, 4);
  const auto v = random_values(len * 64, 5);
  std::vector<double> probs(shape.heads * len * len);
  std::vector<double> out(len * 64);
  for (auto _ : state) {
    Kernel(q, kk, v, shape, probs, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(bm_matmul<k::serial::matmul>)->Name("matmul/serial")->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(bm_matmul<k::omp::matmul>)->Name("matmul/omp")->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(bm_attention<k::serial::attention_forward>)->Name("attention/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_attention<k::omp::attention_forward>)->Name("attention/omp")->Arg(64)->Arg(256);

BENCHMARK_MAIN();
