#include <benchmark/benchmark.h>

#include <random>

#include "phpq/pooling.hpp"

namespace {

using namespace phpq;

DenseArray random_map(std::size_t h, std::size_t w, std::size_t c) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DenseArray a({h, w, c});
  for (double& v : a.values()) v = u(rng);
  return a;
}

void BM_GspPool(benchmark::State& state) {
  static const DenseArray map = random_map(28, 28, 512);
  const double rho = state.range(0) == 0 ? kMaxPoolRho : static_cast<double>(state.range(0));
  for (auto _ : state) {
    auto v = gsp_pool(map, rho);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_GspPool)->Arg(1)->Arg(2)->Arg(3)->Arg(0)->Unit(benchmark::kMicrosecond);

void BM_GspGrad(benchmark::State& state) {
  static const DenseArray map = random_map(28, 28, 512);
  for (auto _ : state) {
    auto g = gsp_grad(map, 3.0);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_GspGrad)->Unit(benchmark::kMicrosecond);

}  // namespace
