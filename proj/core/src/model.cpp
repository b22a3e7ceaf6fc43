#include "e2/model.hpp"

#include <algorithm>
#include <cmath>

namespace e2 {

void ModelConfig::validate() const {
  E2_CHECK(window_samples % patch_len == 0,
           "model config: window samples " + std::to_string(window_samples) +
               " not divisible by patch length " + std::to_string(patch_len));
  E2_CHECK(channels >= 1 && channels <= codebook_size,
           "model config: channel count exceeds codebook size");
  E2_CHECK(d_e % encoder_heads == 0, "model config: d_e not divisible by encoder heads");
  E2_CHECK(d_llm % lm_heads == 0, "model config: d_llm not divisible by lm heads");
  E2_CHECK(summary_tokens >= 1, "model config: need at least one summary token");
  E2_CHECK(vocab > Tokenizer::kNumSpecials, "model config: vocabulary not set");
  E2_CHECK(lora_rank >= 1, "model config: lora rank must be >= 1");
}

namespace {
int64_t g_max_attention_rows = 0;
void note_attention_rows(int64_t rows) {
  g_max_attention_rows = std::max(g_max_attention_rows, rows);
}
}  // namespace

namespace probe {
void reset_max_attention() { g_max_attention_rows = 0; }
int64_t max_attention_rows() { return g_max_attention_rows; }
}  // namespace probe

// ---------------------------------------------------------------- init

namespace {

void add_linear(ParamStore& p, const std::string& name, int64_t in, int64_t out, Rng& rng) {
  p.add(name + ".w", Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true));
  p.add(name + ".b", Tensor::zeros({out}, true));
}

void add_block(ParamStore& p, const std::string& prefix, int64_t dim, int ff_mult, Rng& rng) {
  p.add(prefix + ".ln1.g", Tensor::full({dim}, 1.0, true));
  p.add(prefix + ".ln1.b", Tensor::zeros({dim}, true));
  add_linear(p, prefix + ".attn.wq", dim, dim, rng);
  add_linear(p, prefix + ".attn.wk", dim, dim, rng);
  add_linear(p, prefix + ".attn.wv", dim, dim, rng);
  add_linear(p, prefix + ".attn.wo", dim, dim, rng);
  p.add(prefix + ".ln2.g", Tensor::full({dim}, 1.0, true));
  p.add(prefix + ".ln2.b", Tensor::zeros({dim}, true));
  add_linear(p, prefix + ".mlp.fc", dim, ff_mult * dim, rng);
  add_linear(p, prefix + ".mlp.proj", ff_mult * dim, dim, rng);
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamStore p;
  Rng rng(derive_seed(seed, "params"));

  // encoder
  add_linear(p, "encoder.embed", cfg.patch_len, cfg.d_e, rng);
  p.add("encoder.codebook", Tensor::randn({cfg.codebook_size, cfg.d_e}, rng, 0.02, true));
  p.add("encoder.summary", Tensor::randn({cfg.summary_tokens, cfg.d_e}, rng, 0.02, true));
  for (int i = 0; i < cfg.spatial_layers; ++i)
    add_block(p, "encoder.spatial" + std::to_string(i), cfg.d_e, cfg.ff_mult, rng);
  for (int i = 0; i < cfg.temporal_layers; ++i)
    add_block(p, "encoder.temporal" + std::to_string(i), cfg.d_e, cfg.ff_mult, rng);

  // projector
  add_linear(p, "projector.fc", cfg.d_e, cfg.projector_hidden(), rng);
  add_linear(p, "projector.proj", cfg.projector_hidden(), cfg.d_llm, rng);

  // classifier, stored [C, d_e] with the logits taking its transpose
  p.add("classifier.w", Tensor::randn({kNumEmotions, cfg.d_e}, rng, 0.02, true));
  p.add("classifier.b", Tensor::zeros({kNumEmotions}, true));

  // language model
  p.add("lm.tok_emb", Tensor::randn({cfg.vocab, cfg.d_llm}, rng, 0.02, true));
  p.add("lm.pos_emb", Tensor::randn({cfg.max_seq, cfg.d_llm}, rng, 0.02, true));
  for (int i = 0; i < cfg.lm_layers; ++i)
    add_block(p, "lm.block" + std::to_string(i), cfg.d_llm, cfg.ff_mult, rng);
  p.add("lm.lnf.g", Tensor::full({cfg.d_llm}, 1.0, true));
  p.add("lm.lnf.b", Tensor::zeros({cfg.d_llm}, true));
  p.add("lm.head.w", Tensor::randn({cfg.d_llm, cfg.vocab}, rng, 0.02, true));
  p.add("lm.head.b", Tensor::zeros({cfg.vocab}, true));

  // adapters: right-multiply layout, delta = (alpha/r) * x * A * B
  for (int i = 0; i < cfg.lm_layers; ++i) {
    for (const char* t : {"wq", "wk"}) {
      std::string base = "lora.block" + std::to_string(i) + "." + t;
      p.add(base + ".a", Tensor::randn({cfg.d_llm, cfg.lora_rank}, rng,
                                       1.0 / std::sqrt(static_cast<double>(cfg.d_llm)), true));
      p.add(base + ".b", Tensor::zeros({cfg.lora_rank, cfg.d_llm}, true));
    }
  }
  return p;
}

int64_t lora_trainable_params(const ModelConfig& cfg) {
  // r * (d_in + d_out) per adapted matrix, two matrices per block
  return static_cast<int64_t>(cfg.lm_layers) * 2 * cfg.lora_rank * (cfg.d_llm + cfg.d_llm);
}

// ---------------------------------------------------------------- patches

Tensor patchify(const Matrix& x, int64_t patch_len) {
  E2_CHECK(patch_len > 0 && x.cols % patch_len == 0,
           "patchify: " + std::to_string(x.cols) + " samples not divisible by patch length " +
               std::to_string(patch_len));
  int64_t m = x.rows, n = x.cols / patch_len;
  // row-major {M, N, d} has exactly the window's memory layout
  return Tensor::from_data({m, n, patch_len}, x.v);
}

Matrix unpatchify(const Tensor& patches) {
  E2_CHECK(patches.rank() == 3, "unpatchify: expected rank-3 tensor");
  const Shape& s = patches.shape();
  Matrix out(s[0], s[1] * s[2]);
  out.v = patches.data();
  return out;
}

Tensor embed_patches(const Tensor& patches, const ParamStore& params,
                     const std::vector<int64_t>& channel_ids) {
  E2_CHECK(patches.rank() == 3, "embed_patches: expected rank-3 patches");
  const Shape& s = patches.shape();
  int64_t m = s[0], n = s[1], d = s[2];
  E2_CHECK(static_cast<int64_t>(channel_ids.size()) == m,
           "embed_patches: " + std::to_string(channel_ids.size()) + " channel ids for " +
               std::to_string(m) + " channels");
  const Tensor& codebook = params.at("encoder.codebook");
  for (int64_t id : channel_ids)
    E2_CHECK(id >= 0 && id < codebook.rows(),
             "embed_patches: channel id " + std::to_string(id) + " outside the codebook");

  Tensor flat = reshape(patches, {m * n, d});
  Tensor e = add_rowwise(matmul(flat, params.at("encoder.embed.w")), params.at("encoder.embed.b"));
  std::vector<int64_t> expanded(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      expanded[static_cast<size_t>(i * n + j)] = channel_ids[static_cast<size_t>(i)];
  e = add(e, take_rows(codebook, expanded));
  int64_t d_e = e.cols();
  return reshape(e, {m, n, d_e});
}

// ---------------------------------------------------------------- blocks

namespace {

struct LoraSpec {
  const ParamStore* params = nullptr;
  double scaling = 0.0;
  double dropout = 0.0;
  std::optional<uint64_t> dropout_seed;  // engaged only while training
};

Tensor lora_delta(const Tensor& x, const std::string& base, const LoraSpec& lora) {
  Tensor in = x;
  if (lora.dropout_seed && lora.dropout > 0.0) {
    // inverted dropout with a mask derived from (seed, adapter name)
    Rng rng(derive_seed(*lora.dropout_seed, base));
    std::vector<double> mask(static_cast<size_t>(x.numel()));
    double keep = 1.0 - lora.dropout;
    for (auto& v : mask) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    in = mul(x, Tensor::from_data(x.shape(), std::move(mask)));
  }
  Tensor d = matmul(matmul(in, lora.params->at(base + ".a")), lora.params->at(base + ".b"));
  return scale(d, lora.scaling);
}

// pre-LN transformer block; causal_mask adds -1e9 above the diagonal
Tensor transformer_block(const Tensor& x, const ParamStore& p, const std::string& prefix,
                         int heads, const Tensor* causal_mask, const LoraSpec* lora) {
  int64_t seq = x.rows(), dim = x.cols();
  int64_t head_dim = dim / heads;

  Tensor a = layernorm_lastdim(x, p.at(prefix + ".ln1.g"), p.at(prefix + ".ln1.b"));
  Tensor q = add_rowwise(matmul(a, p.at(prefix + ".attn.wq.w")), p.at(prefix + ".attn.wq.b"));
  Tensor k = add_rowwise(matmul(a, p.at(prefix + ".attn.wk.w")), p.at(prefix + ".attn.wk.b"));
  if (lora) {
    q = add(q, lora_delta(a, "lora." + prefix.substr(3) + ".wq", *lora));
    k = add(k, lora_delta(a, "lora." + prefix.substr(3) + ".wk", *lora));
  }
  Tensor v = add_rowwise(matmul(a, p.at(prefix + ".attn.wv.w")), p.at(prefix + ".attn.wv.b"));

  note_attention_rows(seq);

  std::vector<Tensor> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * head_dim, (h + 1) * head_dim);
    Tensor kh = slice_cols(k, h * head_dim, (h + 1) * head_dim);
    Tensor vh = slice_cols(v, h * head_dim, (h + 1) * head_dim);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (causal_mask) scores = add(scores, *causal_mask);
    head_outs.push_back(matmul(softmax_lastdim(scores), vh));
  }
  Tensor att = concat_cols(head_outs);
  Tensor o = add_rowwise(matmul(att, p.at(prefix + ".attn.wo.w")), p.at(prefix + ".attn.wo.b"));
  Tensor x1 = add(x, o);

  Tensor b = layernorm_lastdim(x1, p.at(prefix + ".ln2.g"), p.at(prefix + ".ln2.b"));
  Tensor hmid = gelu(add_rowwise(matmul(b, p.at(prefix + ".mlp.fc.w")), p.at(prefix + ".mlp.fc.b")));
  Tensor mout = add_rowwise(matmul(hmid, p.at(prefix + ".mlp.proj.w")), p.at(prefix + ".mlp.proj.b"));
  return add(x1, mout);
}

}  // namespace

// ---------------------------------------------------------------- encoder

EncoderOut encode(const Tensor& embedded, const ParamStore& params, const ModelConfig& cfg) {
  E2_CHECK(embedded.rank() == 3, "encode: expected rank-3 embedded patches");
  const Shape& s = embedded.shape();
  int64_t m = s[0], n = s[1], d_e = s[2];
  E2_CHECK(d_e == cfg.d_e, "encode: embedding width " + std::to_string(d_e) +
                               " does not match config d_e " + std::to_string(cfg.d_e));

  Tensor flat = reshape(embedded, {m * n, d_e});
  const Tensor& summary = params.at("encoder.summary");
  int64_t s_tokens = summary.rows();

  std::vector<Tensor> summaries;
  summaries.reserve(static_cast<size_t>(n));
  for (int64_t j = 0; j < n; ++j) {
    std::vector<int64_t> idx(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) idx[static_cast<size_t>(i)] = i * n + j;
    Tensor tokens = concat_rows({take_rows(flat, idx), summary});
    for (int l = 0; l < cfg.spatial_layers; ++l)
      tokens = transformer_block(tokens, params, "encoder.spatial" + std::to_string(l),
                                 cfg.encoder_heads, nullptr, nullptr);
    Tensor pooled_summary = mean_rows(slice_rows(tokens, m, m + s_tokens));
    summaries.push_back(reshape(pooled_summary, {1, d_e}));
  }
  Tensor h = concat_rows(summaries);  // {N, d_e}

  Tensor t = h;
  for (int l = 0; l < cfg.temporal_layers; ++l)
    t = transformer_block(t, params, "encoder.temporal" + std::to_string(l), cfg.encoder_heads,
                          nullptr, nullptr);
  Tensor pooled = reshape(mean_rows(t), {1, d_e});
  return {h, pooled};
}

EncoderOut encode_window(const Matrix& window, const std::vector<int64_t>& channel_ids,
                         const ParamStore& params, const ModelConfig& cfg) {
  Tensor patches = patchify(window, cfg.patch_len);
  Tensor embedded = embed_patches(patches, params, channel_ids);
  return encode(embedded, params, cfg);
}

Tensor project(const Tensor& h, const ParamStore& params) {
  Tensor mid = gelu(add_rowwise(matmul(h, params.at("projector.fc.w")), params.at("projector.fc.b")));
  return add_rowwise(matmul(mid, params.at("projector.proj.w")), params.at("projector.proj.b"));
}

Tensor classifier_logits(const Tensor& pooled, const ParamStore& params) {
  return add_rowwise(matmul(pooled, transpose(params.at("classifier.w"))),
                     params.at("classifier.b"));
}

Tensor classify(const Tensor& pooled, const ParamStore& params) {
  return reshape(softmax_lastdim(classifier_logits(pooled, params)), {kNumEmotions});
}

// ---------------------------------------------------------------- assembly

namespace {

std::vector<int64_t> iota_ids(int64_t n) {
  std::vector<int64_t> v(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i)] = i;
  return v;
}

// split text on <eeg:k> placeholders into literal runs and block indices
struct TextPiece {
  std::string text;  // empty when this piece is a placeholder
  int block = -1;
};

std::vector<TextPiece> split_placeholders(const std::string& text) {
  std::vector<TextPiece> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t open = text.find("<eeg:", pos);
    if (open == std::string::npos) {
      out.push_back({text.substr(pos), -1});
      break;
    }
    size_t close = text.find('>', open);
    E2_CHECK(close != std::string::npos, "assemble_input: unterminated placeholder in: " + text);
    if (open > pos) out.push_back({text.substr(pos, open - pos), -1});
    std::string num = text.substr(open + 5, close - open - 5);
    E2_CHECK(!num.empty() && num.find_first_not_of("0123456789") == std::string::npos,
             "assemble_input: malformed placeholder in: " + text);
    out.push_back({"", std::stoi(num)});
    pos = close + 1;
  }
  return out;
}

}  // namespace

Assembled assemble_input(const std::vector<Turn>& turns, const std::vector<Tensor>& eeg_blocks,
                         const Tokenizer& tok, const ParamStore& params, const ModelConfig& cfg) {
  const Tensor& emb = params.at("lm.tok_emb");
  std::vector<Tensor> rows;
  Assembled out;
  std::vector<bool> used(eeg_blocks.size(), false);

  auto push_tokens = [&](const std::vector<int64_t>& ids) {
    if (ids.empty()) return;
    rows.push_back(take_rows(emb, ids));
    out.ids.insert(out.ids.end(), ids.begin(), ids.end());
  };

  push_tokens({Tokenizer::kBos});
  for (const auto& turn : turns) {
    bool assistant = turn.role == "assistant";
    push_tokens(tok.encode(assistant ? "assistant :" : "user :"));
    if (assistant) {
      std::vector<int64_t> ids = tok.encode(turn.text);
      ids.push_back(Tokenizer::kEos);  // response terminator is supervised
      int64_t start = static_cast<int64_t>(out.ids.size());
      push_tokens(ids);
      out.answer_spans.push_back({start, start + static_cast<int64_t>(ids.size())});
    } else {
      for (const auto& piece : split_placeholders(turn.text)) {
        if (piece.block < 0) {
          push_tokens(tok.encode(piece.text));
        } else {
          E2_CHECK(piece.block < static_cast<int>(eeg_blocks.size()),
                   "assemble_input: placeholder <eeg:" + std::to_string(piece.block) +
                       "> has no block (" + std::to_string(eeg_blocks.size()) + " provided)");
          E2_CHECK(!used[static_cast<size_t>(piece.block)],
                   "assemble_input: block " + std::to_string(piece.block) + " used twice");
          used[static_cast<size_t>(piece.block)] = true;
          const Tensor& z = eeg_blocks[static_cast<size_t>(piece.block)];
          E2_CHECK(z.cols() == cfg.d_llm, "assemble_input: EEG block width " +
                                              std::to_string(z.cols()) + " != d_llm");
          push_tokens({Tokenizer::kEegStart});
          rows.push_back(z);
          for (int64_t r = 0; r < z.rows(); ++r) out.ids.push_back(-1);
          push_tokens({Tokenizer::kEegEnd});
        }
      }
    }
  }
  for (size_t k = 0; k < used.size(); ++k)
    E2_CHECK(used[k], "assemble_input: eeg block " + std::to_string(k) + " never referenced");

  out.embeddings = concat_rows(rows);
  E2_CHECK(out.embeddings.rows() <= cfg.max_seq,
           "assemble_input: sequence length " + std::to_string(out.embeddings.rows()) +
               " exceeds max_seq " + std::to_string(cfg.max_seq));
  return out;
}

// ---------------------------------------------------------------- lm

Tensor lm_forward(const Tensor& embeddings, const ParamStore& params, const ModelConfig& cfg,
                  bool use_lora, std::optional<uint64_t> dropout_seed) {
  int64_t seq = embeddings.rows();
  E2_CHECK(seq <= cfg.max_seq, "lm_forward: sequence too long");
  Tensor x = add(embeddings, take_rows(params.at("lm.pos_emb"), iota_ids(seq)));

  // strictly causal additive mask: position l attends to positions <= l
  std::vector<double> mask_data(static_cast<size_t>(seq * seq), 0.0);
  for (int64_t i = 0; i < seq; ++i)
    for (int64_t j = i + 1; j < seq; ++j) mask_data[static_cast<size_t>(i * seq + j)] = -1e9;
  Tensor mask = Tensor::from_data({seq, seq}, std::move(mask_data));

  LoraSpec lora;
  if (use_lora) {
    lora.params = &params;
    lora.scaling = cfg.lora_alpha / static_cast<double>(cfg.lora_rank);
    lora.dropout = cfg.lora_dropout;
    lora.dropout_seed = dropout_seed;
  }
  for (int l = 0; l < cfg.lm_layers; ++l)
    x = transformer_block(x, params, "lm.block" + std::to_string(l), cfg.lm_heads, &mask,
                          use_lora ? &lora : nullptr);
  x = layernorm_lastdim(x, params.at("lm.lnf.g"), params.at("lm.lnf.b"));
  return add_rowwise(matmul(x, params.at("lm.head.w")), params.at("lm.head.b"));
}

Tensor lm_loss(const Assembled& a, const Tensor& logits) {
  std::vector<int64_t> input_pos;
  std::vector<int64_t> targets;
  for (const auto& [start, end] : a.answer_spans) {
    for (int64_t l = start; l < end; ++l) {
      E2_CHECK(l > 0 && l < static_cast<int64_t>(a.ids.size()), "lm_loss: span out of range");
      E2_CHECK(a.ids[static_cast<size_t>(l)] >= 0, "lm_loss: EEG row marked as target");
      input_pos.push_back(l - 1);
      targets.push_back(a.ids[static_cast<size_t>(l)]);
    }
  }
  E2_CHECK(!targets.empty(), "lm_loss: sample has no supervised tokens");
  return cross_entropy(take_rows(logits, input_pos), targets);
}

std::vector<Tensor> eeg_blocks_for(const QASample& s,
                                   const std::function<const Window&(const std::string&)>& window_by_id,
                                   const ParamStore& params, const ModelConfig& cfg) {
  std::vector<Tensor> blocks;
  blocks.reserve(s.eeg_refs.size());
  for (const auto& ref : s.eeg_refs) {
    const Window& w = window_by_id(ref);
    EncoderOut enc = encode_window(w.data, iota_ids(w.data.rows), params, cfg);
    blocks.push_back(project(enc.h, params));
  }
  return blocks;
}

Tensor sample_lm_loss(const QASample& s,
                      const std::function<const Window&(const std::string&)>& window_by_id,
                      const ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                      bool use_lora, std::optional<uint64_t> dropout_seed) {
  std::vector<Tensor> blocks = eeg_blocks_for(s, window_by_id, params, cfg);
  Assembled a = assemble_input(s.turns, blocks, tok, params, cfg);
  Tensor logits = lm_forward(a.embeddings, params, cfg, use_lora, dropout_seed);
  return lm_loss(a, logits);
}

std::string generate_reply(const std::vector<Turn>& history, const std::vector<Tensor>& eeg_blocks,
                           const ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                           int64_t max_tokens, bool use_lora) {
  std::vector<Turn> turns = history;
  turns.push_back({"assistant", ""});
  // assemble the prompt: everything up to and including the "assistant :" cue;
  // the empty final turn contributes its markers plus a supervised <eos> we trim
  Assembled a = assemble_input(turns, eeg_blocks, tok, params, cfg);
  // drop the trailing <eos> that the empty assistant text produced
  Tensor prompt = slice_rows(a.embeddings, 0, a.embeddings.rows() - 1);
  std::vector<int64_t> generated;
  const Tensor& emb = params.at("lm.tok_emb");

  for (int64_t step = 0; step < max_tokens; ++step) {
    if (prompt.rows() >= cfg.max_seq) break;
    Tensor logits = lm_forward(prompt, params, cfg, use_lora, {});
    int64_t last = logits.rows() - 1;
    int64_t best = 0;
    double best_v = logits.at(last, 0);
    for (int64_t vtok = 1; vtok < logits.cols(); ++vtok) {
      if (logits.at(last, vtok) > best_v) {
        best_v = logits.at(last, vtok);
        best = vtok;
      }
    }
    if (best == Tokenizer::kEos) break;
    generated.push_back(best);
    prompt = concat_rows({prompt, take_rows(emb, {best})});
  }
  return tok.decode(generated);
}

}  // namespace e2
