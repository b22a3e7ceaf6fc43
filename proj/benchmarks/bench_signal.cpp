#include <benchmark/benchmark.h>

#include "e2/signal.hpp"

using namespace e2;

static void BM_BandpassSecond(benchmark::State& state) {
  std::vector<double> x(1000);
  Rng rng(1);
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) {
    auto y = bandpass_filter(x, 0.1, 70.0, 1000.0);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_BandpassSecond);

static void BM_Resample1kTo256(benchmark::State& state) {
  std::vector<double> x(static_cast<size_t>(state.range(0)) * 1000);
  Rng rng(2);
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) {
    auto y = resample(x, 1000.0, 256.0);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_Resample1kTo256)->Arg(1)->Arg(10);

static void BM_PreprocessRecording(benchmark::State& state) {
  auto rec = synth_recording(Emotion::happy, 20.0, 8, 1000.0, 3, "bench");
  PreprocessConfig cfg;
  for (auto _ : state) {
    auto ws = preprocess(rec, cfg, 7);
    benchmark::DoNotOptimize(ws);
  }
}
BENCHMARK(BM_PreprocessRecording);
