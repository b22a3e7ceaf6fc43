#include "e2/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace e2 {

ScheduleKind parse_schedule(const std::string& s) {
  std::string u = lowercase(s);
  if (u == "one_cycle" || u == "onecycle") return ScheduleKind::one_cycle;
  if (u == "cosine") return ScheduleKind::cosine;
  throw ConfigError("unknown schedule kind: '" + s + "'");
}

std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::one_cycle ? "one_cycle" : "cosine";
}

double lr_schedule(ScheduleKind kind, int64_t step, int64_t total_steps, double peak_lr) {
  E2_CHECK(total_steps > 0, "lr_schedule: total_steps must be positive");
  E2_CHECK(step >= 0 && step <= total_steps, "lr_schedule: step outside [0, total]");
  double u;
  switch (kind) {
    case ScheduleKind::cosine:
      u = static_cast<double>(step) / static_cast<double>(total_steps);
      return peak_lr * (1.0 + std::cos(M_PI * u)) / 2.0;
    case ScheduleKind::one_cycle: {
      const double warm_frac = 0.3, div = 25.0, final_div = 1e4;
      double start = peak_lr / div, floor = peak_lr / final_div;
      int64_t warm = static_cast<int64_t>(warm_frac * static_cast<double>(total_steps));
      if (warm < 1) warm = 1;
      if (step <= warm) {
        u = static_cast<double>(step) / static_cast<double>(warm);
        return start + (peak_lr - start) * (1.0 - std::cos(M_PI * u)) / 2.0;
      }
      u = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
      return floor + (peak_lr - floor) * (1.0 + std::cos(M_PI * u)) / 2.0;
    }
  }
  fail("bad schedule kind");
}

void adam_update_inplace(std::vector<double>& value, const std::vector<double>& grad,
                         std::vector<double>& m, std::vector<double>& v, int64_t step, double lr,
                         double weight_decay, bool decoupled, double beta1, double beta2,
                         double eps) {
  E2_CHECK(value.size() == grad.size(), "adam: gradient shape mismatch (" +
                                            std::to_string(value.size()) + " vs " +
                                            std::to_string(grad.size()) + ")");
  if (m.empty()) m.assign(value.size(), 0.0);
  if (v.empty()) v.assign(value.size(), 0.0);
  E2_CHECK(m.size() == value.size() && v.size() == value.size(),
           "adam: moment buffer shape mismatch");
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (size_t i = 0; i < value.size(); ++i) {
    if (decoupled && weight_decay != 0.0) value[i] -= lr * weight_decay * value[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void adam_step(ParamStore& params, const std::vector<std::string>& names, AdamState& state,
               double lr, double weight_decay, bool decoupled) {
  state.step += 1;
  for (const auto& name : names) {
    Tensor& t = params.at(name);
    adam_update_inplace(t.mutable_data(), t.grad(), state.m[name], state.v[name], state.step, lr,
                        weight_decay, decoupled);
  }
}

// ---------------------------------------------------------------- stages

std::vector<std::string> stage_trainable_prefixes(int stage) {
  switch (stage) {
    case 1: return {"encoder.", "classifier."};
    case 2: return {"projector."};
    case 3: return {"projector.", "lora."};
  }
  fail("stage must be 1, 2 or 3");
}

std::vector<std::string> stage_frozen_prefixes(int stage) {
  switch (stage) {
    case 1: return {"projector.", "lm.", "lora."};
    case 2: return {"encoder.", "lm.", "classifier.", "lora."};
    case 3: return {"encoder.", "lm.", "classifier."};
  }
  fail("stage must be 1, 2 or 3");
}

std::vector<std::string> apply_stage_freezing(ParamStore& params, int stage) {
  auto trainable = stage_trainable_prefixes(stage);
  std::vector<std::string> names;
  for (const auto& name : params.names()) {
    bool on = std::any_of(trainable.begin(), trainable.end(),
                          [&](const std::string& p) { return name.rfind(p, 0) == 0; });
    params.at(name).set_requires_grad(on);
    if (on) names.push_back(name);
  }
  return names;
}

namespace {

constexpr int64_t kStateVersionTag = 0x7261;

// mid-stage snapshot: all params + adam moments + progress counters
void save_state(const std::string& path, const ParamStore& params, const AdamState& adam,
                int stage, int64_t next_epoch) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, t] : params.map()) out.emplace("param." + name, t.detached());
  for (const auto& [name, buf] : adam.m)
    out.emplace("adam.m." + name, Tensor::from_data({static_cast<int64_t>(buf.size())}, buf));
  for (const auto& [name, buf] : adam.v)
    out.emplace("adam.v." + name, Tensor::from_data({static_cast<int64_t>(buf.size())}, buf));
  out.emplace("meta", Tensor::from_data({4}, {static_cast<double>(kStateVersionTag),
                                              static_cast<double>(stage),
                                              static_cast<double>(next_epoch),
                                              static_cast<double>(adam.step)}));
  save_checkpoint(path, out);
}

int64_t load_state(const std::string& path, ParamStore& params, AdamState& adam, int stage) {
  auto in = load_checkpoint(path);
  auto meta_it = in.find("meta");
  E2_CHECK(meta_it != in.end(), "train state '" + path + "' has no meta record");
  const auto& meta = meta_it->second.data();
  E2_CHECK(meta.size() == 4 && static_cast<int64_t>(meta[0]) == kStateVersionTag,
           "train state '" + path + "' has an unrecognized layout");
  E2_CHECK(static_cast<int>(meta[1]) == stage,
           "train state '" + path + "' belongs to stage " + std::to_string(static_cast<int>(meta[1])));
  adam.step = static_cast<int64_t>(meta[3]);
  for (auto& [name, t] : in) {
    if (name.rfind("param.", 0) == 0) {
      Tensor& dst = params.at(name.substr(6));
      E2_CHECK(dst.shape() == t.shape(), "train state: shape mismatch for " + name);
      dst.mutable_data() = t.data();
    } else if (name.rfind("adam.m.", 0) == 0) {
      adam.m[name.substr(7)] = t.data();
    } else if (name.rfind("adam.v.", 0) == 0) {
      adam.v[name.substr(7)] = t.data();
    }
  }
  return static_cast<int64_t>(meta[2]);  // next epoch
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, int stage, int64_t epoch) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "stage" + std::to_string(stage) + "-epoch-" + std::to_string(epoch)));
  rng.shuffle(idx);
  return idx;
}

}  // namespace

double stage1_train_accuracy(const ParamStore& params, const ModelConfig& cfg,
                             const std::vector<Window>& windows) {
  E2_CHECK(!windows.empty(), "accuracy over empty window set");
  std::vector<int64_t> ids(static_cast<size_t>(cfg.channels));
  for (int64_t i = 0; i < cfg.channels; ++i) ids[static_cast<size_t>(i)] = i;
  int64_t hits = 0;
  for (const auto& w : windows) {
    EncoderOut enc = encode_window(w.data, ids, params, cfg);
    Tensor probs = classify(enc.pooled, params);
    int64_t best = 0;
    for (int64_t c = 1; c < kNumEmotions; ++c)
      if (probs.data()[static_cast<size_t>(c)] > probs.data()[static_cast<size_t>(best)]) best = c;
    if (best == static_cast<int64_t>(w.emotion)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(windows.size());
}

StageResult stage1_run(ParamStore& params, const ModelConfig& cfg,
                       const std::vector<Window>& windows, const StagePlan& plan, uint64_t seed) {
  E2_CHECK(!windows.empty(), "stage 1: empty window set");
  for (const auto& w : windows)
    E2_CHECK(w.data.rows == cfg.channels && w.data.cols == cfg.window_samples,
             "stage 1: window '" + w.window_id + "' shape does not match the model config");

  auto names = apply_stage_freezing(params, 1);
  AdamState adam;
  int64_t start_epoch = 0;
  if (!plan.resume_from.empty()) start_epoch = load_state(plan.resume_from, params, adam, 1);

  std::vector<int64_t> ch_ids(static_cast<size_t>(cfg.channels));
  for (int64_t i = 0; i < cfg.channels; ++i) ch_ids[static_cast<size_t>(i)] = i;

  int64_t steps_per_epoch =
      (static_cast<int64_t>(windows.size()) + plan.batch_size - 1) / plan.batch_size;
  int64_t total_steps = plan.epochs * steps_per_epoch;
  StageResult res;
  res.trainable_params = 0;
  for (const auto& n : names) res.trainable_params += params.at(n).numel();

  for (int64_t epoch = start_epoch; epoch < plan.epochs; ++epoch) {
    auto order = epoch_order(windows.size(), seed, 1, epoch);
    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      size_t lo = static_cast<size_t>(b * plan.batch_size);
      size_t hi = std::min(windows.size(), lo + static_cast<size_t>(plan.batch_size));
      if (lo >= hi) break;
      std::vector<Tensor> logit_rows;
      std::vector<int64_t> targets;
      for (size_t i = lo; i < hi; ++i) {
        const Window& w = windows[order[i]];
        EncoderOut enc = encode_window(w.data, ch_ids, params, cfg);
        logit_rows.push_back(classifier_logits(enc.pooled, params));
        targets.push_back(static_cast<int64_t>(w.emotion));
      }
      Tensor loss = cross_entropy(concat_rows(logit_rows), targets);
      params.zero_grads();
      backward(loss);
      double lr = lr_schedule(plan.schedule, adam.step, total_steps, plan.peak_lr);
      adam_step(params, names, adam, lr, plan.weight_decay, plan.decoupled);
      res.curve.push_back({static_cast<double>(adam.step), lr, loss.item()});
      res.final_loss = loss.item();
    }
    if (plan.checkpoint_every > 0 && !plan.state_path.empty() &&
        (epoch + 1) % plan.checkpoint_every == 0 && epoch + 1 < plan.epochs)
      save_state(plan.state_path, params, adam, 1, epoch + 1);
  }
  res.train_accuracy = stage1_train_accuracy(params, cfg, windows);
  return res;
}

namespace {

StageResult run_lm_stage(int stage, ParamStore& params, const ModelConfig& cfg,
                         const Tokenizer& tok, const std::vector<QASample>& samples,
                         const std::unordered_map<std::string, Window>& windows,
                         const StagePlan& plan, uint64_t seed) {
  E2_CHECK(!samples.empty(), "stage " + std::to_string(stage) + ": empty sample set");
  bool use_lora = stage == 3;
  if (use_lora) {
    for (int i = 0; i < cfg.lm_layers; ++i)
      for (const char* t : {"wq", "wk"}) {
        std::string base = "lora.block" + std::to_string(i) + "." + t;
        E2_CHECK(params.has(base + ".a") && params.has(base + ".b"),
                 "stage 3: adapter '" + base + "' targets a layer with no parameters");
      }
  }

  auto lookup = [&windows](const std::string& id) -> const Window& {
    auto it = windows.find(id);
    E2_CHECK(it != windows.end(), "sample references missing window '" + id + "'");
    return it->second;
  };

  auto names = apply_stage_freezing(params, stage);
  AdamState adam;
  int64_t start_epoch = 0;
  if (!plan.resume_from.empty()) start_epoch = load_state(plan.resume_from, params, adam, stage);

  int64_t steps_per_epoch =
      (static_cast<int64_t>(samples.size()) + plan.batch_size - 1) / plan.batch_size;
  int64_t total_steps = plan.epochs * steps_per_epoch;
  StageResult res;
  for (const auto& n : names) res.trainable_params += params.at(n).numel();

  for (int64_t epoch = start_epoch; epoch < plan.epochs; ++epoch) {
    auto order = epoch_order(samples.size(), seed, stage, epoch);
    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      size_t lo = static_cast<size_t>(b * plan.batch_size);
      size_t hi = std::min(samples.size(), lo + static_cast<size_t>(plan.batch_size));
      if (lo >= hi) break;
      Tensor loss;
      std::optional<uint64_t> drop_seed;
      if (use_lora && cfg.lora_dropout > 0.0)
        drop_seed = derive_seed(seed, "dropout-" + std::to_string(adam.step));
      for (size_t i = lo; i < hi; ++i) {
        Tensor li = sample_lm_loss(samples[order[i]], lookup, params, cfg, tok, use_lora,
                                   drop_seed ? std::optional<uint64_t>(derive_seed(*drop_seed, std::to_string(i)))
                                             : std::nullopt);
        loss = loss.defined() ? add(loss, li) : li;
      }
      loss = scale(loss, 1.0 / static_cast<double>(hi - lo));
      params.zero_grads();
      backward(loss);
      double lr = lr_schedule(plan.schedule, adam.step, total_steps, plan.peak_lr);
      adam_step(params, names, adam, lr, plan.weight_decay, plan.decoupled);
      res.curve.push_back({static_cast<double>(adam.step), lr, loss.item()});
      res.final_loss = loss.item();
    }
    if (plan.checkpoint_every > 0 && !plan.state_path.empty() &&
        (epoch + 1) % plan.checkpoint_every == 0 && epoch + 1 < plan.epochs)
      save_state(plan.state_path, params, adam, stage, epoch + 1);
  }
  return res;
}

}  // namespace

StageResult stage2_run(ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                       const std::vector<QASample>& samples,
                       const std::unordered_map<std::string, Window>& windows,
                       const StagePlan& plan, uint64_t seed) {
  return run_lm_stage(2, params, cfg, tok, samples, windows, plan, seed);
}

StageResult stage3_run(ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                       const std::vector<QASample>& samples,
                       const std::unordered_map<std::string, Window>& windows,
                       const StagePlan& plan, uint64_t seed) {
  return run_lm_stage(3, params, cfg, tok, samples, windows, plan, seed);
}

void save_loss_curve(const std::string& path, const std::vector<std::array<double, 3>>& curve) {
  std::ofstream os(path, std::ios::trunc);
  E2_CHECK(os.good(), "cannot write loss curve '" + path + "'");
  os << "step,lr,loss\n";
  char buf[96];
  for (const auto& row : curve) {
    std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g\n", static_cast<long long>(row[0]), row[1],
                  row[2]);
    os << buf;
  }
}

}  // namespace e2
