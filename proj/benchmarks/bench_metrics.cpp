#include <benchmark/benchmark.h>

#include "e2/eval.hpp"

using namespace e2;

static void BM_MetricsOnRandomMatrix(benchmark::State& state) {
  Rng rng(9);
  ConfusionMatrix cm(kNumEmotions);
  for (int g = 0; g < cm.classes; ++g)
    for (int p = 0; p <= cm.classes; ++p) cm.at(g, p) = rng.randint(1, 500);
  for (auto _ : state) {
    double v = balanced_accuracy(cm) + cohens_kappa(cm) + weighted_f1(cm);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_MetricsOnRandomMatrix);

static void BM_ParseAnswer(benchmark::State& state) {
  std::string text =
      "Segment a: subdued affect. Segment b: strong positive affect. Answer: 1-b, 2-a, 3-c";
  for (auto _ : state) {
    auto v = parse_answer(text, TaskType::EIM);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_ParseAnswer);
