#include <benchmark/benchmark.h>

#include "e2/tensor.hpp"

using namespace e2;

static void BM_Matmul(benchmark::State& state) {
  int64_t n = state.range(0);
  Rng rng(5);
  Tensor a = Tensor::randn({n, n}, rng, 1.0);
  Tensor b = Tensor::randn({n, n}, rng, 1.0);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_ForwardBackwardMLP(benchmark::State& state) {
  Rng rng(6);
  Tensor x = Tensor::randn({16, 64}, rng, 1.0);
  Tensor w1 = Tensor::randn({64, 128}, rng, 0.1, true);
  Tensor w2 = Tensor::randn({128, 64}, rng, 0.1, true);
  for (auto _ : state) {
    Tensor loss = mean_all(matmul(gelu(matmul(x, w1)), w2));
    w1.zero_grad();
    w2.zero_grad();
    backward(loss);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_ForwardBackwardMLP);
