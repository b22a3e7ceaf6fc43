#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "e2/checkpoint.hpp"
#include "e2/dataset.hpp"
#include "e2/tensor.hpp"
#include "e2/tokenizer.hpp"

namespace e2 {

struct ModelConfig {
  // encoder
  int64_t channels = 58;          // M
  int64_t window_samples = 1024;  // T
  int64_t patch_len = 64;         // d (250 ms at 256 Hz)
  int64_t d_e = 64;
  int encoder_heads = 4;
  int spatial_layers = 1;
  int temporal_layers = 1;
  int64_t summary_tokens = 4;  // s
  int64_t codebook_size = 64;  // channel embedding rows available
  // projector (d_h == 0 means d_llm)
  int64_t d_h = 0;
  // language model
  int64_t d_llm = 64;
  int lm_layers = 4;
  int lm_heads = 4;
  int64_t max_seq = 256;
  int64_t vocab = 0;  // frozen from the tokenizer
  int ff_mult = 2;    // MLP hidden = ff_mult * width
  // low-rank adapters on every LM block's query/key projections
  int64_t lora_rank = 8;
  double lora_alpha = 16.0;
  double lora_dropout = 0.05;

  int64_t n_patches() const { return window_samples / patch_len; }
  int64_t projector_hidden() const { return d_h > 0 ? d_h : d_llm; }
  void validate() const;
};

// Fresh parameter store. Weight layout is row-major right-multiply
// (y = x * W), so "encoder.embed.w" is [d, d_e] etc. LoRA B factors start at
// zero, making freshly attached adapters an exact identity.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

int64_t lora_trainable_params(const ModelConfig& cfg);

// ---- encoder ----

// [M x T] -> {M, N, d} with p[i][j] == X[i, j*d : (j+1)*d]
Tensor patchify(const Matrix& x, int64_t patch_len);
Matrix unpatchify(const Tensor& patches);

// {M, N, d} -> {M, N, d_e}; e[i][j] = p[i][j] * W_p + b_p + codebook[channel_ids[i]]
Tensor embed_patches(const Tensor& patches, const ParamStore& params,
                     const std::vector<int64_t>& channel_ids);

struct EncoderOut {
  Tensor h;       // {N, d_e} spatial summary per timestep (feeds the projector)
  Tensor pooled;  // {1, d_e} mean over the temporal transformer outputs
};

// Spatial attention per timestep over M channel tokens + s summary tokens,
// then a bidirectional temporal transformer over the N summaries. Attention
// is only ever (M+s)^2 or N^2, never (M*N)^2.
EncoderOut encode(const Tensor& embedded, const ParamStore& params, const ModelConfig& cfg);
EncoderOut encode_window(const Matrix& window, const std::vector<int64_t>& channel_ids,
                         const ParamStore& params, const ModelConfig& cfg);

// {N, d_e} -> {N, d_llm}, two-layer GELU MLP applied per timestep
Tensor project(const Tensor& h, const ParamStore& params);

// softmax(W_c * pooled + b_c) -> {C}
Tensor classifier_logits(const Tensor& pooled, const ParamStore& params);
Tensor classify(const Tensor& pooled, const ParamStore& params);

// ---- language model ----

struct Assembled {
  Tensor embeddings;            // {L, d_llm}
  std::vector<int64_t> ids;     // token id per position, -1 on EEG vector rows
  std::vector<std::pair<int64_t, int64_t>> answer_spans;  // [start,end) target positions
  int64_t supervised_tokens() const {
    int64_t n = 0;
    for (auto& [a, b] : answer_spans) n += b - a;
    return n;
  }
};

// Expand "<eeg:k>" placeholders into <eeg_start> z_k <eeg_end> runs, wrap
// turns in role markers, and mark assistant responses (plus their closing
// <eos>) as the supervised spans.
Assembled assemble_input(const std::vector<Turn>& turns, const std::vector<Tensor>& eeg_blocks,
                         const Tokenizer& tok, const ParamStore& params, const ModelConfig& cfg);

// Causal transformer over an assembled embedding sequence -> logits {L, V}.
// With use_lora, query/key projections become W + (alpha/r) * B * A; dropout
// on the adapter input is applied only when dropout_seed is provided.
Tensor lm_forward(const Tensor& embeddings, const ParamStore& params, const ModelConfig& cfg,
                  bool use_lora = false, std::optional<uint64_t> dropout_seed = {});

// masked next-token cross entropy over the answer spans
Tensor lm_loss(const Assembled& a, const Tensor& logits);

// Full loss for one QA sample: encode every referenced window, project,
// assemble, run the LM. Window lookup is by eeg_ref id.
Tensor sample_lm_loss(const QASample& s,
                      const std::function<const Window&(const std::string&)>& window_by_id,
                      const ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                      bool use_lora = false, std::optional<uint64_t> dropout_seed = {});

// Greedy decode of the next assistant reply given the conversation so far.
// Deterministic; stops at <eos>, max_tokens, or the context limit.
std::string generate_reply(const std::vector<Turn>& history, const std::vector<Tensor>& eeg_blocks,
                           const ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                           int64_t max_tokens, bool use_lora = false);

// encode+project all eeg_refs of a sample into LM-space blocks
std::vector<Tensor> eeg_blocks_for(const QASample& s,
                                   const std::function<const Window&(const std::string&)>& window_by_id,
                                   const ParamStore& params, const ModelConfig& cfg);

// structural instrumentation: largest attention score-matrix row count seen
namespace probe {
void reset_max_attention();
int64_t max_attention_rows();
}  // namespace probe

}  // namespace e2
