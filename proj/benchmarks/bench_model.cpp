#include <benchmark/benchmark.h>

#include "e2/model.hpp"

using namespace e2;

namespace {
ModelConfig bench_config() {
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.window_samples = 1024;
  cfg.patch_len = 64;
  cfg.d_e = 64;
  cfg.encoder_heads = 4;
  cfg.summary_tokens = 4;
  cfg.codebook_size = 8;
  cfg.d_llm = 64;
  cfg.lm_layers = 4;
  cfg.lm_heads = 4;
  cfg.max_seq = 256;
  cfg.vocab = 384;
  return cfg;
}
}  // namespace

static void BM_EncoderForward(benchmark::State& state) {
  ModelConfig cfg = bench_config();
  ParamStore params = init_params(cfg, 1);
  Rng rng(2);
  Matrix window(cfg.channels, cfg.window_samples);
  for (auto& v : window.v) v = rng.normal();
  std::vector<int64_t> ids = {0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : state) {
    EncoderOut out = encode_window(window, ids, params, cfg);
    benchmark::DoNotOptimize(out.pooled);
  }
}
BENCHMARK(BM_EncoderForward);

static void BM_LmForward(benchmark::State& state) {
  ModelConfig cfg = bench_config();
  ParamStore params = init_params(cfg, 3);
  Rng rng(4);
  Tensor seq = Tensor::randn({state.range(0), cfg.d_llm}, rng, 1.0);
  for (auto _ : state) {
    Tensor logits = lm_forward(seq, params, cfg);
    benchmark::DoNotOptimize(logits);
  }
}
BENCHMARK(BM_LmForward)->Arg(32)->Arg(96);
