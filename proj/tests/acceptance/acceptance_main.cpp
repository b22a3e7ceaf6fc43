// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria are property-based (oracle agreement, invariants,
// analytically forced rates, learnability) plus runtime budgets.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "e2/eval.hpp"
#include "e2/pipeline.hpp"
#include "e2/train.hpp"
#include "e2/window_store.hpp"
#include "testutil.hpp"

using namespace e2;
using namespace e2::testutil;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define REQUIRE_MSG(cond, msg)                      \
  do {                                              \
    if (!(cond)) {                                  \
      std::ostringstream os_;                       \
      os_ << msg;                                   \
      throw Failure(os_.str());                     \
    }                                               \
  } while (0)

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string work_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "e2_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

// window fixtures for dataset-level criteria: labels matter, contents do not
std::vector<Window> light_windows(int64_t total, const std::string& prefix) {
  std::vector<Window> out;
  Rng rng(fnv1a64(prefix));
  for (int64_t i = 0; i < total; ++i) {
    Window w;
    w.emotion = static_cast<Emotion>(i % kNumEmotions);
    w.window_id = prefix + "-" + std::to_string(i);
    w.data = Matrix(2, 8);
    for (auto& v : w.data.v) v = rng.normal();
    out.push_back(std::move(w));
  }
  return out;
}

// ------------------------------------------------------------ criterion 1

void criterion_random_baseline() {
  auto t0 = std::chrono::steady_clock::now();
  // 14,000-sample IED eval set, uniform-random responder
  auto windows = light_windows(14000, "rb");
  TemplateBank bank = TemplateBank::builtin();
  EvalSets sets = build_eval_set(windows, bank, 4242, EvalCounts{0, 0, 0, 0});
  REQUIRE_MSG(sets.ied.size() == 14000, "expected 14000 IED samples");

  Rng rng(777);
  CallbackSource source([&rng](const QASample&) {
    return "Answer: " + emotion_names()[static_cast<size_t>(rng.randint(0, 6))];
  });
  EvalOutcome out = run_eval(source, sets);

  double bal = out.report.balanced_accuracy;
  double kappa = out.report.kappa;
  double f1 = out.report.weighted_f1;
  REQUIRE_MSG(std::fabs(bal - 1.0 / 7.0) <= 0.010,
              "balanced accuracy " << bal << " not within 0.1429 +/- 0.010");
  REQUIRE_MSG(std::fabs(kappa) <= 0.03, "kappa " << kappa << " not within 0 +/- 0.03");
  REQUIRE_MSG(std::fabs(f1 - 1.0 / 7.0) <= 0.015,
              "weighted F1 " << f1 << " not within 0.1429 +/- 0.015");
  double elapsed = seconds_since(t0);
  REQUIRE_MSG(elapsed < 10.0, "runtime " << elapsed << "s exceeds the 10 s budget");
}

// ------------------------------------------------------------ criterion 2

void criterion_preprocessing() {
  auto t0 = std::chrono::steady_clock::now();
  double fs = 1000.0;

  // passband within 5%, stopband at least 20 dB down (FFT oracle)
  auto pass = trim_edges(bandpass_filter(make_tone(10.0, fs, 10.0), 0.1, 70.0, fs), 1.0, fs);
  double pass_amp = tone_amplitude(pass, 10.0, fs);
  REQUIRE_MSG(std::fabs(pass_amp - 1.0) <= 0.05, "10 Hz passband amplitude " << pass_amp);
  auto stop = trim_edges(bandpass_filter(make_tone(200.0, fs, 10.0), 0.1, 70.0, fs), 1.0, fs);
  double stop_amp = tone_amplitude(stop, 200.0, fs);
  REQUIRE_MSG(stop_amp <= 0.1, "200 Hz stopband amplitude " << stop_amp << " (< 20 dB)");
  auto hum = trim_edges(notch_filter(make_tone(50.0, fs, 10.0), 50.0, fs), 1.0, fs);
  REQUIRE_MSG(tone_amplitude(hum, 50.0, fs) <= 0.1, "50 Hz notch residual too large");
  auto near = trim_edges(notch_filter(make_tone(40.0, fs, 10.0), 50.0, fs), 1.0, fs);
  REQUIRE_MSG(std::fabs(tone_amplitude(near, 40.0, fs) - 1.0) <= 0.10, "40 Hz neighbor harmed");

  // exact segment/window counts over 20 synthetic recordings of mixed length
  PreprocessConfig cfg;
  int64_t expected = 0;
  std::vector<std::vector<Window>> runs(2);
  for (int rep = 0; rep < 2; ++rep) {
    for (int i = 0; i < 20; ++i) {
      double dur = 12.0 + 7.0 * (i % 5);  // 12..40 s
      expected += rep == 0 ? static_cast<int64_t>(dur / cfg.segment_seconds) : 0;
      auto rec = synth_recording(static_cast<Emotion>(i % kNumEmotions), dur, 6, fs,
                                 9000 + static_cast<uint64_t>(i), "acc2-" + std::to_string(i));
      auto ws = preprocess(rec, cfg, 31);
      runs[static_cast<size_t>(rep)].insert(runs[static_cast<size_t>(rep)].end(), ws.begin(),
                                            ws.end());
    }
  }
  REQUIRE_MSG(static_cast<int64_t>(runs[0].size()) == expected,
              "window count " << runs[0].size() << " != sum of floor(dur/10) = " << expected);

  // zero channel-mean after referencing, everywhere
  for (const auto& w : runs[0])
    for (int64_t t = 0; t < w.data.cols; ++t) {
      double mean = 0;
      for (int64_t c = 0; c < w.data.rows; ++c) mean += w.data.at(c, t);
      REQUIRE_MSG(std::fabs(mean / w.data.rows) < 1e-6,
                  "channel mean " << mean / w.data.rows << " at sample " << t);
    }

  // bit-determinism across reruns
  REQUIRE_MSG(runs[0].size() == runs[1].size(), "rerun emitted a different window count");
  for (size_t i = 0; i < runs[0].size(); ++i) {
    REQUIRE_MSG(runs[0][i].window_id == runs[1][i].window_id, "window id drift at " << i);
    REQUIRE_MSG(runs[0][i].data.v == runs[1][i].data.v, "window data drift at " << i);
  }

  double elapsed = seconds_since(t0);
  REQUIRE_MSG(elapsed < 30.0, "runtime " << elapsed << "s exceeds the 30 s budget");
}

// ------------------------------------------------------------ criterion 3

ModelConfig grad_check_config(int64_t vocab) {
  // pinned desk dims: M=8, T=512, d=64, d_e=32, d_LLM=32
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.window_samples = 512;
  cfg.patch_len = 64;
  cfg.d_e = 32;
  cfg.encoder_heads = 4;
  cfg.spatial_layers = 1;
  cfg.temporal_layers = 1;
  cfg.summary_tokens = 4;
  cfg.codebook_size = 8;
  cfg.d_llm = 32;
  cfg.lm_layers = 2;
  cfg.lm_heads = 4;
  cfg.max_seq = 160;
  cfg.ff_mult = 2;
  cfg.lora_rank = 8;
  cfg.lora_alpha = 16;
  cfg.lora_dropout = 0.0;
  cfg.vocab = vocab;
  return cfg;
}

void criterion_gradients() {
  auto t0 = std::chrono::steady_clock::now();

  // every differentiable core op against central differences
  Rng rng(515);
  Tensor x = Tensor::randn({4, 6}, rng, 1.0);
  Tensor w = Tensor::randn({6, 5}, rng, 1.0);
  Tensor bias = Tensor::randn({6}, rng, 1.0);
  Tensor gain = Tensor::randn({6}, rng, 0.5);
  struct OpCase {
    const char* name;
    std::function<Tensor(const Tensor&)> f;
    const Tensor* at;
  };
  std::vector<OpCase> cases = {
      {"matmul", [&](const Tensor& t) { return mean_all(matmul(t, w)); }, &x},
      {"add", [&](const Tensor& t) { return mean_all(add(t, x)); }, &x},
      {"add_rowwise", [&](const Tensor& t) { return mean_all(add_rowwise(x, t)); }, &bias},
      {"scale", [&](const Tensor& t) { return sum_all(scale(t, 1.7)); }, &x},
      {"mul", [&](const Tensor& t) { return mean_all(mul(t, x)); }, &x},
      {"gelu", [&](const Tensor& t) { return mean_all(gelu(t)); }, &x},
      {"softmax", [&](const Tensor& t) { return mean_all(mul(softmax_lastdim(t), x)); }, &x},
      {"layernorm", [&](const Tensor& t) { return mean_all(layernorm_lastdim(t, gain, bias)); },
       &x},
      {"embedding_lookup", [&](const Tensor& t) { return mean_all(take_rows(t, {1, 3, 3, 0})); },
       &x},
      {"concat", [&](const Tensor& t) { return mean_all(concat_rows({t, scale(t, -1.0)})); }, &x},
      {"slice", [&](const Tensor& t) { return mean_all(slice_rows(t, 1, 3)); }, &x},
      {"mean", [&](const Tensor& t) { return sum_all(mean_rows(t)); }, &x},
      {"cross_entropy", [&](const Tensor& t) { return cross_entropy(matmul(t, w), {0, 2, 4, 1}); },
       &x},
  };
  for (auto& c : cases) {
    double err = grad_check(c.f, *c.at, 1e-5, 200, 99);
    REQUIRE_MSG(err < 1e-6, "core op " << c.name << " grad error " << err << " >= 1e-6");
  }

  TemplateBank bank = TemplateBank::builtin();
  Tokenizer tok = build_tokenizer(bank);
  ModelConfig cfg = grad_check_config(tok.vocab_size());
  ParamStore params = init_params(cfg, 616);

  Rng wrng(717);
  Window win;
  win.emotion = Emotion::fear;
  win.window_id = "gc";
  win.data = Matrix(cfg.channels, cfg.window_samples);
  for (auto& v : win.data.v) v = wrng.normal();
  std::vector<int64_t> ch_ids(static_cast<size_t>(cfg.channels));
  std::iota(ch_ids.begin(), ch_ids.end(), 0);

  auto clone_with = [&](const std::string& name, const Tensor& t) {
    ParamStore out;
    for (const auto& [k, v] : params.map()) out.add(k, k == name ? t : v);
    return out;
  };

  // stage-1 loss (classification) with respect to the patch embedding W_p
  auto stage1_loss = [&](const Tensor& t) {
    ParamStore p = clone_with("encoder.embed.w", t);
    EncoderOut enc = encode_window(win.data, ch_ids, p, cfg);
    return cross_entropy(classifier_logits(enc.pooled, p),
                         {static_cast<int64_t>(win.emotion)});
  };
  double e1 = grad_check(stage1_loss, params.at("encoder.embed.w"), 1e-5, 200, 111);
  REQUIRE_MSG(e1 < 1e-4, "stage-1 loss grad wrt W_p: " << e1 << " >= 1e-4");

  // stage-2 loss (masked LM, 2-sample batch) with respect to the projector
  Rng srng(919);
  Window win2 = win;
  win2.window_id = "gc2";
  win2.emotion = Emotion::happy;
  for (auto& v : win2.data.v) v = srng.normal();
  std::unordered_map<std::string, Window> wmap = {{"gc", win}, {"gc2", win2}};
  auto lookup = [&](const std::string& id) -> const Window& { return wmap.at(id); };
  QASample s1 = synthesize_ied(win, bank, srng);
  QASample s2 = synthesize_ied(win2, bank, srng);
  for (const char* pname : {"projector.fc.w", "projector.proj.w"}) {
    auto stage2_loss = [&](const Tensor& t) {
      ParamStore p = clone_with(pname, t);
      return scale(add(sample_lm_loss(s1, lookup, p, cfg, tok),
                       sample_lm_loss(s2, lookup, p, cfg, tok)),
                   0.5);
    };
    double e2 = grad_check(stage2_loss, params.at(pname), 1e-5, 200, 222);
    REQUIRE_MSG(e2 < 1e-4, "stage-2 loss grad wrt " << pname << ": " << e2 << " >= 1e-4");
  }

  double elapsed = seconds_since(t0);
  REQUIRE_MSG(elapsed < 120.0, "runtime " << elapsed << "s exceeds the 2 min budget");
}

// ------------------------------------------------------------ criterion 4

void criterion_curriculum_contracts() {
  TemplateBank bank = TemplateBank::builtin();
  Tokenizer tok = build_tokenizer(bank);
  ModelConfig cfg = grad_check_config(tok.vocab_size());
  cfg.lora_dropout = 0.05;

  Rng wrng(2024);
  std::vector<Window> windows;
  for (int e = 0; e < kNumEmotions; ++e)
    for (int i = 0; i < 2; ++i) {
      Window w;
      w.emotion = static_cast<Emotion>(e);
      w.window_id = "c4-" + std::to_string(e) + "-" + std::to_string(i);
      w.data = Matrix(cfg.channels, cfg.window_samples);
      for (auto& v : w.data.v) v = wrng.normal();
      windows.push_back(std::move(w));
    }
  std::unordered_map<std::string, Window> wmap;
  for (auto& w : windows) wmap.emplace(w.window_id, w);
  auto samples = build_training_set(windows, 8, TaskMix{1, 0, 0, 0}, bank, 11);

  ParamStore params = init_params(cfg, 3030);

  // LoRA at zero init is bit-exact identity on the logits
  Rng srng(4040);
  Tensor seq = Tensor::randn({24, cfg.d_llm}, srng, 1.0);
  Tensor base = lm_forward(seq, params, cfg, false);
  Tensor adapted = lm_forward(seq, params, cfg, true);
  REQUIRE_MSG(base.data() == adapted.data(), "zero-init adapters changed the logits");

  // closed-form trainable counts
  int64_t lora_expect = 0;
  for (int i = 0; i < cfg.lm_layers; ++i)
    lora_expect += 2 * cfg.lora_rank * (cfg.d_llm + cfg.d_llm);  // wq and wk per block
  REQUIRE_MSG(params.numel_with_prefix("lora.") == lora_expect,
              "lora parameter count mismatch: " << params.numel_with_prefix("lora.") << " vs "
                                                << lora_expect);

  struct StageCase {
    int stage;
    std::vector<std::string> frozen;
  };
  std::vector<StageCase> stages = {
      {1, {"projector.", "lm.", "lora."}},
      {2, {"encoder.", "lm.", "classifier.", "lora."}},
      {3, {"encoder.", "lm.", "classifier."}},
  };
  for (const auto& sc : stages) {
    std::vector<uint64_t> before;
    for (const auto& g : sc.frozen) before.push_back(params.group_checksum(g));
    StagePlan plan{sc.stage, 1, 4, 1e-3, sc.stage == 1 ? 0.01 : 0.0, sc.stage == 1,
                   sc.stage == 1 ? ScheduleKind::one_cycle : ScheduleKind::cosine, 0, "", ""};
    StageResult res;
    if (sc.stage == 1)
      res = stage1_run(params, cfg, windows, plan, 5);
    else if (sc.stage == 2)
      res = stage2_run(params, cfg, tok, samples, wmap, plan, 6);
    else
      res = stage3_run(params, cfg, tok, samples, wmap, plan, 7);
    for (size_t i = 0; i < sc.frozen.size(); ++i)
      REQUIRE_MSG(params.group_checksum(sc.frozen[i]) == before[i],
                  "stage " << sc.stage << " modified frozen group " << sc.frozen[i]);
    // trainable parameter accounting
    int64_t expect = 0;
    for (const auto& p : stage_trainable_prefixes(sc.stage))
      expect += params.numel_with_prefix(p);
    REQUIRE_MSG(res.trainable_params == expect, "stage " << sc.stage << " trainable count "
                                                         << res.trainable_params << " != "
                                                         << expect);
    if (sc.stage == 3)
      REQUIRE_MSG(res.trainable_params ==
                      params.numel_with_prefix("projector.") + lora_expect,
                  "stage 3 trainable != projector + r*(d_in+d_out) sum");
  }
}

// ------------------------------------------------------------ criterion 5

void criterion_learnability() {
  auto t_total = std::chrono::steady_clock::now();

  // (a) stage 1 on the 700-window synthetic fixture, d_e = 64
  PreprocessConfig pre;
  std::vector<Window> fixture;
  for (int e = 0; e < kNumEmotions; ++e)
    for (int i = 0; i < 10; ++i) {
      std::string id = "c5-" + emotion_names()[static_cast<size_t>(e)] + "-" + std::to_string(i);
      auto rec = synth_recording(static_cast<Emotion>(e), 100.0, 8, 1000.0,
                                 derive_seed(5150, id), id);
      auto ws = preprocess(rec, pre, 5150);
      fixture.insert(fixture.end(), ws.begin(), ws.end());
    }
  REQUIRE_MSG(fixture.size() == 700, "fixture has " << fixture.size() << " windows, wanted 700");

  TemplateBank bank = TemplateBank::builtin();
  Tokenizer tok = build_tokenizer(bank);
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.window_samples = 1024;
  cfg.patch_len = 64;
  cfg.d_e = 64;
  cfg.encoder_heads = 4;
  cfg.spatial_layers = 1;
  cfg.temporal_layers = 1;
  cfg.summary_tokens = 4;
  cfg.codebook_size = 8;
  cfg.d_llm = 64;
  cfg.lm_layers = 4;
  cfg.lm_heads = 4;
  cfg.max_seq = 256;
  cfg.ff_mult = 2;
  cfg.lora_rank = 8;
  cfg.lora_alpha = 16;
  cfg.lora_dropout = 0.05;
  cfg.vocab = tok.vocab_size();

  ParamStore params = init_params(cfg, 5151);
  StagePlan plan{1, 12, 16, 2e-3, 0.01, true, ScheduleKind::one_cycle, 0, "", ""};
  StageResult s1 = stage1_run(params, cfg, fixture, plan, 5152);
  REQUIRE_MSG(s1.train_accuracy >= 0.95, "stage 1 train accuracy " << s1.train_accuracy
                                                                   << " < 0.95 within 30 epochs");

  // (b) stage 3 overfit: 50 samples, >= 90% exact-match within 200 epochs
  ModelConfig ocfg = grad_check_config(tok.vocab_size());
  ocfg.lora_dropout = 0.05;
  Rng wrng(6001);
  std::vector<Window> owin;
  for (int e = 0; e < kNumEmotions; ++e)
    for (int i = 0; i < 8; ++i) {
      Window w;
      w.emotion = static_cast<Emotion>(e);
      w.window_id = "c5o-" + std::to_string(e) + "-" + std::to_string(i);
      w.data = Matrix(ocfg.channels, ocfg.window_samples);
      for (auto& v : w.data.v) v = wrng.normal();
      owin.push_back(std::move(w));
    }
  std::unordered_map<std::string, Window> omap;
  for (auto& w : owin) omap.emplace(w.window_id, w);
  auto lookup = [&](const std::string& id) -> const Window& { return omap.at(id); };
  auto overfit = build_training_set(owin, 50, TaskMix{1, 0, 0, 0}, bank, 6002, {false});

  ParamStore oparams = init_params(ocfg, 6003);
  auto exact_match = [&]() {
    int hits = 0;
    for (const auto& s : overfit) {
      std::vector<Tensor> blocks = eeg_blocks_for(s, lookup, oparams, ocfg);
      std::vector<Turn> hist = {s.turns[0]};
      std::string reply = generate_reply(hist, blocks, oparams, ocfg, tok, 8, true);
      auto parsed = parse_answer(reply, s.task);
      if (parsed && *parsed == s.answer_key) ++hits;
    }
    return hits;
  };
  int epochs_used = 0;
  int hits = 0;
  for (int block : {120, 40, 40}) {  // 120, then up to 200 total
    StagePlan oplan{3, block, 10, 3e-3, 0.0, false, ScheduleKind::cosine, 0, "", ""};
    stage3_run(oparams, ocfg, tok, overfit, omap, oplan, 6004 + static_cast<uint64_t>(epochs_used));
    epochs_used += block;
    hits = exact_match();
    if (hits >= 45) break;
  }
  REQUIRE_MSG(hits >= 45, "stage-3 overfit exact match " << hits << "/50 after " << epochs_used
                                                         << " epochs (< 90%)");

  // (c) the full three-stage desk run fits the single-core budget
  auto t_desk = std::chrono::steady_clock::now();
  RunConfig desk = RunConfig::with_preset("desk");
  desk.out_dir = work_dir("desk_run");
  cmd_preprocess(desk, 0);
  cmd_synthesize(desk);
  cmd_train(desk, TrainOptions{});
  double desk_elapsed = seconds_since(t_desk);
  REQUIRE_MSG(desk_elapsed <= 900.0,
              "full desk run took " << desk_elapsed << "s, budget is 900 s");

  auto summary = nlohmann::json::parse(std::ifstream(paths::train_summary(desk.out_dir)));
  for (const auto& s : summary["stages"]) {
    REQUIRE_MSG(s["status"] == "ran", "desk run skipped a stage");
    REQUIRE_MSG(s["frozen_intact"].get<bool>(), "desk run broke a freezing contract");
  }
  REQUIRE_MSG(summary["stages"][0]["train_accuracy"].get<double>() >= 0.95,
              "desk stage-1 accuracy below 95%");
  (void)t_total;
}

// ------------------------------------------------------------ criterion 6

void criterion_metric_oracles() {
  Rng rng(8181);
  for (int trial = 0; trial < 1000; ++trial) {
    int classes = static_cast<int>(rng.randint(2, 10));
    ConfusionMatrix cm(classes);
    // totals up to 10^4 spread over the cells, parse-fail column included
    int64_t budget = rng.randint(classes, 10000);
    while (budget > 0) {
      int g = static_cast<int>(rng.randint(0, classes - 1));
      int p = static_cast<int>(rng.randint(0, classes));
      int64_t amount = rng.randint(1, std::max<int64_t>(1, budget / 4));
      cm.at(g, p) += amount;
      budget -= amount;
    }
    for (int g = 0; g < classes; ++g) {
      int64_t row = 0;
      for (int p = 0; p <= classes; ++p) row += cm.at(g, p);
      if (row == 0) cm.at(g, static_cast<int>(rng.randint(0, classes - 1))) = 1;
    }

    double bal = balanced_accuracy(cm);
    double kappa = cohens_kappa(cm);
    double f1 = weighted_f1(cm);
    REQUIRE_MSG(std::fabs(bal - oracle_balanced_accuracy(cm)) < 1e-12,
                "balanced accuracy diverges from the oracle at trial " << trial);
    REQUIRE_MSG(std::fabs(kappa - oracle_kappa(cm)) < 1e-12,
                "kappa diverges from the oracle at trial " << trial);
    REQUIRE_MSG(std::fabs(f1 - oracle_weighted_f1(cm)) < 1e-12,
                "weighted F1 diverges from the oracle at trial " << trial);
    REQUIRE_MSG(kappa >= -1.0 - 1e-12 && kappa <= 1.0 + 1e-12,
                "kappa " << kappa << " outside [-1, 1]");

    // class-permutation invariance on both axes
    std::vector<int> perm(static_cast<size_t>(classes));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    ConfusionMatrix moved(classes);
    for (int g = 0; g < classes; ++g)
      for (int p = 0; p <= classes; ++p)
        moved.at(perm[static_cast<size_t>(g)],
                 p == classes ? classes : perm[static_cast<size_t>(p)]) = cm.at(g, p);
    REQUIRE_MSG(std::fabs(balanced_accuracy(moved) - bal) < 1e-12,
                "balanced accuracy not permutation-invariant");
    REQUIRE_MSG(std::fabs(cohens_kappa(moved) - kappa) < 1e-12,
                "kappa not permutation-invariant");
    REQUIRE_MSG(std::fabs(weighted_f1(moved) - f1) < 1e-12,
                "weighted F1 not permutation-invariant");
  }
}

// ------------------------------------------------------------ criterion 7

void criterion_dataset_protocol() {
  TemplateBank bank = TemplateBank::builtin();
  auto train_windows = light_windows(700, "c7train");
  auto test_windows = light_windows(2761, "c7test");

  auto train = build_training_set(train_windows, 10000, TaskMix{}, bank, 7001);
  REQUIRE_MSG(train.size() == 10000, "train count " << train.size() << " != 10000");
  EvalSets sets = build_eval_set(test_windows, bank, 7002, EvalCounts{167, 167, 166, 167});
  REQUIRE_MSG(sets.ied.size() == 2761, "IED eval count " << sets.ied.size() << " != 2761");
  REQUIRE_MSG(sets.multi.size() == 500, "multi-task count " << sets.multi.size() << " != 500");
  REQUIRE_MSG(sets.esr.size() == 167, "ESR count " << sets.esr.size() << " != 167");

  int64_t validated = 0;
  for (const auto& s : train) {
    REQUIRE_MSG(s.task != TaskType::ESR, "ESR sample leaked into training: " << s.id);
    validate_sample(s);
    validate_cot(s, true);
    ++validated;
  }
  for (const auto* split : {&sets.ied, &sets.multi, &sets.esr})
    for (const auto& s : *split) {
      validate_sample(s);
      validate_cot(s, true);
      ++validated;
    }
  REQUIRE_MSG(validated == 10000 + 2761 + 500 + 167,
              "validator did not see every sample: " << validated);

  // the answer-only toggle produces bare Answer lines everywhere
  auto plain = build_training_set(train_windows, 10000, TaskMix{}, bank, 7001, {false});
  EvalSets plain_sets =
      build_eval_set(test_windows, bank, 7002, EvalCounts{167, 167, 166, 167}, {false});
  for (const auto& s : plain) validate_cot(s, false);
  for (const auto* split : {&plain_sets.ied, &plain_sets.multi, &plain_sets.esr})
    for (const auto& s : *split) validate_cot(s, false);
}

// ------------------------------------------------------------ criterion 8

RunConfig tiny_run_config(const std::string& out) {
  RunConfig cfg = RunConfig::with_preset("desk");
  cfg.out_dir = out;
  cfg.synthetic_per_emotion = 2;
  cfg.synthetic_duration_s = 25.0;
  cfg.synthetic_channels = 4;
  cfg.train_samples = 16;
  cfg.eval_counts = {2, 2, 2, 2};
  cfg.model.d_e = 8;
  cfg.model.d_llm = 8;
  cfg.model.patch_len = 128;
  cfg.model.encoder_heads = 2;
  cfg.model.lm_heads = 2;
  cfg.model.lm_layers = 1;
  cfg.model.summary_tokens = 2;
  cfg.model.lora_rank = 2;
  cfg.model.lora_alpha = 4;
  cfg.stage1.epochs = 1;
  cfg.stage2.epochs = 1;
  cfg.stage3.epochs = 1;
  cfg.stage3_samples = 4;
  cfg.gen_max_tokens = 4;
  return cfg;
}

void criterion_ablation_switches() {
  // --skip-stage k completes end to end and is labeled in the summary
  for (int k = 1; k <= 3; ++k) {
    RunConfig cfg = tiny_run_config(work_dir("ablate_skip" + std::to_string(k)));
    cmd_preprocess(cfg, 14);
    cmd_synthesize(cfg);
    TrainOptions opt;
    opt.skip = {k};
    cmd_train(cfg, opt);
    cmd_evaluate(cfg, "model");
    cmd_report(cfg.out_dir);

    auto summary = nlohmann::json::parse(std::ifstream(paths::train_summary(cfg.out_dir)));
    std::string want = "w/o Stage " + std::to_string(k);
    bool labeled = false;
    for (const auto& a : summary["ablations"])
      if (a.get<std::string>() == want) labeled = true;
    REQUIRE_MSG(labeled, "missing ablation label '" << want << "'");
    REQUIRE_MSG(summary["stages"][static_cast<size_t>(k - 1)]["status"] == "skipped",
                "stage " << k << " was not skipped");
    REQUIRE_MSG(fs::exists(paths::report_json(cfg.out_dir)), "ablation run produced no report");
  }

  // --no-cot completes end to end and is labeled
  RunConfig cfg = tiny_run_config(work_dir("ablate_nocot"));
  cfg.cot = false;
  cmd_preprocess(cfg, 14);
  cmd_synthesize(cfg);
  cmd_train(cfg, TrainOptions{});
  cmd_evaluate(cfg, "model");
  cmd_report(cfg.out_dir);
  for (const auto& s : deserialize_samples(paths::train_jsonl(cfg.out_dir)))
    validate_cot(s, false);
  auto summary = nlohmann::json::parse(std::ifstream(paths::train_summary(cfg.out_dir)));
  bool labeled = false;
  for (const auto& a : summary["ablations"])
    if (a.get<std::string>() == "w/o CoT format") labeled = true;
  REQUIRE_MSG(labeled, "missing ablation label 'w/o CoT format'");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void()> fn;
  };
  std::vector<Criterion> criteria = {
      {1, "random-baseline reproduction (balanced acc 14.29, kappa 0, F1 14.29)",
       criterion_random_baseline},
      {2, "preprocessing invariant suite (filters, referencing, counts, determinism)",
       criterion_preprocessing},
      {3, "gradient checks (core ops < 1e-6, end-to-end < 1e-4)", criterion_gradients},
      {4, "curriculum contracts (freezing, LoRA identity, parameter counts)",
       criterion_curriculum_contracts},
      {5, "learnability smoke test (stage-1 95%, stage-3 overfit 90%, desk run budget)",
       criterion_learnability},
      {6, "metric oracle equivalence (1000 random confusion matrices, 1e-12)",
       criterion_metric_oracles},
      {7, "dataset-protocol fidelity (10000/2761/500/167 counts, CoT validator)",
       criterion_dataset_protocol},
      {8, "ablation switches (--skip-stage 1|2|3, --no-cot)", criterion_ablation_switches},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn();
      std::printf("[PASS] criterion %d: %s (%.1fs)\n", c.id, c.name, seconds_since(t0));
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] criterion %d: %s (%.1fs)\n       %s\n", c.id, c.name,
                  seconds_since(t0), e.what());
    }
    std::fflush(stdout);
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
