#include "e2/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "e2/window_store.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace e2 {

namespace paths {
std::string train_store(const std::string& d) { return d + "/windows_train.e2wd"; }
std::string test_store(const std::string& d) { return d + "/windows_test.e2wd"; }
std::string train_jsonl(const std::string& d) { return d + "/train.jsonl"; }
std::string eval_ied(const std::string& d) { return d + "/eval_ied.jsonl"; }
std::string eval_multi(const std::string& d) { return d + "/eval_multi.jsonl"; }
std::string eval_esr(const std::string& d) { return d + "/eval_esr.jsonl"; }
std::string stage_ckpt(const std::string& d, int s) {
  return d + "/stage" + std::to_string(s) + ".e2ck";
}
std::string stage_state(const std::string& d, int s) {
  return d + "/stage" + std::to_string(s) + ".state.e2ck";
}
std::string final_ckpt(const std::string& d) { return d + "/model_final.e2ck"; }
std::string loss_csv(const std::string& d, int s) {
  return d + "/loss_stage" + std::to_string(s) + ".csv";
}
std::string vocab(const std::string& d) { return d + "/vocab.txt"; }
std::string model_config(const std::string& d) { return d + "/model_config.txt"; }
std::string train_summary(const std::string& d) { return d + "/train_summary.json"; }
std::string report_json(const std::string& d) { return d + "/report.json"; }
std::string confusion_csv(const std::string& d) { return d + "/confusion.csv"; }
std::string config_resolved(const std::string& d) { return d + "/config_resolved.txt"; }
}  // namespace paths

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  E2_CHECK(os.good(), "cannot write '" + path + "'");
  os << text;
}

std::string read_text(const std::string& path) {
  std::ifstream is(path);
  E2_CHECK(is.good(), "cannot read '" + path + "'");
  std::string out((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return out;
}

void ensure_out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_text(paths::config_resolved(cfg.out_dir), cfg.dump());
}

void require_file(const std::string& path, const std::string& hint) {
  if (!fs::exists(path)) throw ConfigError("missing " + path + " (" + hint + ")");
}

std::array<int64_t, kNumEmotions> window_counts(const std::vector<Window>& ws) {
  std::array<int64_t, kNumEmotions> counts{};
  for (const auto& w : ws) counts[static_cast<size_t>(w.emotion)]++;
  return counts;
}

void print_counts(const char* label, const std::vector<Window>& ws) {
  auto counts = window_counts(ws);
  std::printf("%s: %zu windows [", label, ws.size());
  for (int e = 0; e < kNumEmotions; ++e)
    std::printf("%s%s=%lld", e ? " " : "", emotion_names()[static_cast<size_t>(e)].c_str(),
                static_cast<long long>(counts[static_cast<size_t>(e)]));
  std::printf("]\n");
}

}  // namespace

TemplateBank load_bank(const RunConfig& cfg) {
  if (cfg.bank_path.empty()) return TemplateBank::builtin();
  require_file(cfg.bank_path, "dataset.bank_path");
  return TemplateBank::from_file(cfg.bank_path);
}

Tokenizer build_tokenizer(const TemplateBank& bank) {
  std::vector<std::string> corpus = bank.all_text();
  for (auto& extra : dataset_vocabulary_extras()) corpus.push_back(extra);
  corpus.push_back("user : assistant :");
  return Tokenizer::build(corpus);
}

// ---------------------------------------------------------------- preprocess

void cmd_preprocess(const RunConfig& cfg, int64_t synthetic_n) {
  cfg.signal.validate();
  ensure_out_dir(cfg);

  std::vector<RawRecording> recordings;
  if (!cfg.input_dir.empty() && synthetic_n == 0) {
    if (!fs::is_directory(cfg.input_dir))
      throw ConfigError("signal.input_dir '" + cfg.input_dir + "' is not a readable directory");
    recordings = load_raw_recordings(cfg.input_dir);
    E2_CHECK(!recordings.empty(), "no recordings found under '" + cfg.input_dir + "'");
  } else {
    int64_t per_emotion = cfg.synthetic_per_emotion;
    int64_t remainder = 0;
    if (synthetic_n > 0) {
      E2_CHECK(synthetic_n >= kNumEmotions,
               "--synthetic needs at least " + std::to_string(kNumEmotions) + " recordings");
      per_emotion = synthetic_n / kNumEmotions;
      remainder = synthetic_n % kNumEmotions;
    }
    for (int e = 0; e < kNumEmotions; ++e) {
      int64_t count = per_emotion + (e < remainder ? 1 : 0);
      for (int64_t i = 0; i < count; ++i) {
        char id[64];
        std::snprintf(id, sizeof(id), "syn-%s-%03lld", emotion_names()[static_cast<size_t>(e)].c_str(),
                      static_cast<long long>(i));
        recordings.push_back(synth_recording(static_cast<Emotion>(e), cfg.synthetic_duration_s,
                                             cfg.synthetic_channels, cfg.synthetic_fs,
                                             derive_seed(cfg.seed, id), id));
      }
    }
  }

  // hold out test_fraction of the recordings per emotion
  std::array<std::vector<const RawRecording*>, kNumEmotions> by_emotion;
  for (const auto& r : recordings) by_emotion[static_cast<size_t>(r.emotion)].push_back(&r);
  std::vector<Window> train, test;
  for (int e = 0; e < kNumEmotions; ++e) {
    auto& group = by_emotion[static_cast<size_t>(e)];
    int64_t n = static_cast<int64_t>(group.size());
    int64_t n_test = static_cast<int64_t>(cfg.test_fraction * static_cast<double>(n) + 0.5);
    if (n >= 2 && n_test == 0) n_test = 1;
    if (n_test >= n) n_test = n - 1 >= 0 ? n - 1 : 0;
    for (int64_t i = 0; i < n; ++i) {
      auto windows = preprocess(*group[static_cast<size_t>(i)], cfg.signal, cfg.seed);
      auto& dst = (i >= n - n_test) ? test : train;
      for (auto& w : windows) dst.push_back(std::move(w));
    }
  }

  save_windows(paths::train_store(cfg.out_dir), train);
  save_windows(paths::test_store(cfg.out_dir), test);
  print_counts("train", train);
  print_counts("test", test);
}

// ---------------------------------------------------------------- synthesize

void cmd_synthesize(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  require_file(paths::train_store(cfg.out_dir), "run `preprocess` first");
  require_file(paths::test_store(cfg.out_dir), "run `preprocess` first");
  auto train_windows = load_windows(paths::train_store(cfg.out_dir));
  auto test_windows = load_windows(paths::test_store(cfg.out_dir));

  TemplateBank bank = load_bank(cfg);
  SynthOptions opt{cfg.cot};
  auto train = build_training_set(train_windows, cfg.train_samples, cfg.mix, bank, cfg.seed, opt);

  std::set<std::string> train_ids;
  for (const auto& w : train_windows) train_ids.insert(w.window_id);
  EvalSets sets = build_eval_set(test_windows, bank, cfg.seed, cfg.eval_counts, opt, &train_ids);

  serialize_samples(paths::train_jsonl(cfg.out_dir), train);
  serialize_samples(paths::eval_ied(cfg.out_dir), sets.ied);
  serialize_samples(paths::eval_multi(cfg.out_dir), sets.multi);
  serialize_samples(paths::eval_esr(cfg.out_dir), sets.esr);
  std::printf("train=%zu eval_ied=%zu eval_multi=%zu eval_esr=%zu cot=%s\n", train.size(),
              sets.ied.size(), sets.multi.size(), sets.esr.size(), cfg.cot ? "on" : "off");
}

// ---------------------------------------------------------------- train

namespace {

ModelConfig bind_model_config(const RunConfig& cfg, const std::vector<Window>& windows,
                              const Tokenizer& tok) {
  E2_CHECK(!windows.empty(), "training window store is empty");
  ModelConfig mc = cfg.model;
  mc.channels = windows.front().data.rows;
  mc.window_samples = windows.front().data.cols;
  if (mc.codebook_size < mc.channels) mc.codebook_size = mc.channels;
  mc.vocab = tok.vocab_size();
  mc.validate();
  return mc;
}

void save_model_config(const std::string& path, const ModelConfig& mc, bool lora_active) {
  std::ostringstream os;
  os << "# special token ids: pad=0 unk=1 bos=2 eos=3 eeg_start=4 eeg_end=5\n";
  os << "channels = " << mc.channels << "\n";
  os << "window_samples = " << mc.window_samples << "\n";
  os << "patch_len = " << mc.patch_len << "\n";
  os << "d_e = " << mc.d_e << "\n";
  os << "d_h = " << mc.d_h << "\n";
  os << "d_llm = " << mc.d_llm << "\n";
  os << "encoder_heads = " << mc.encoder_heads << "\n";
  os << "spatial_layers = " << mc.spatial_layers << "\n";
  os << "temporal_layers = " << mc.temporal_layers << "\n";
  os << "summary_tokens = " << mc.summary_tokens << "\n";
  os << "codebook_size = " << mc.codebook_size << "\n";
  os << "lm_layers = " << mc.lm_layers << "\n";
  os << "lm_heads = " << mc.lm_heads << "\n";
  os << "max_seq = " << mc.max_seq << "\n";
  os << "vocab = " << mc.vocab << "\n";
  os << "ff_mult = " << mc.ff_mult << "\n";
  os << "lora_rank = " << mc.lora_rank << "\n";
  os << "lora_alpha = " << mc.lora_alpha << "\n";
  os << "lora_dropout = " << mc.lora_dropout << "\n";
  os << "lora_active = " << (lora_active ? "true" : "false") << "\n";
  os << "vocab_file = vocab.txt\n";
  write_text(path, os.str());
}

ModelConfig load_model_config(const std::string& path, bool& lora_active) {
  ModelConfig mc;
  std::istringstream is(read_text(path));
  std::string line;
  while (std::getline(is, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    E2_CHECK(eq != std::string::npos, "model config '" + path + "': bad line: " + line);
    std::string k = trim(t.substr(0, eq)), v = trim(t.substr(eq + 1));
    if (k == "channels") mc.channels = std::stoll(v);
    else if (k == "window_samples") mc.window_samples = std::stoll(v);
    else if (k == "patch_len") mc.patch_len = std::stoll(v);
    else if (k == "d_e") mc.d_e = std::stoll(v);
    else if (k == "d_h") mc.d_h = std::stoll(v);
    else if (k == "d_llm") mc.d_llm = std::stoll(v);
    else if (k == "encoder_heads") mc.encoder_heads = std::stoi(v);
    else if (k == "spatial_layers") mc.spatial_layers = std::stoi(v);
    else if (k == "temporal_layers") mc.temporal_layers = std::stoi(v);
    else if (k == "summary_tokens") mc.summary_tokens = std::stoll(v);
    else if (k == "codebook_size") mc.codebook_size = std::stoll(v);
    else if (k == "lm_layers") mc.lm_layers = std::stoi(v);
    else if (k == "lm_heads") mc.lm_heads = std::stoi(v);
    else if (k == "max_seq") mc.max_seq = std::stoll(v);
    else if (k == "vocab") mc.vocab = std::stoll(v);
    else if (k == "ff_mult") mc.ff_mult = std::stoi(v);
    else if (k == "lora_rank") mc.lora_rank = std::stoll(v);
    else if (k == "lora_alpha") mc.lora_alpha = std::stod(v);
    else if (k == "lora_dropout") mc.lora_dropout = std::stod(v);
    else if (k == "lora_active") lora_active = (v == "true");
    else if (k == "vocab_file") { /* sits next to this file */ }
    else fail("model config '" + path + "': unknown key '" + k + "'");
  }
  return mc;
}

json checksum_record(const ParamStore& params, const std::vector<std::string>& prefixes) {
  json j;
  for (const auto& p : prefixes) j[p] = hex64(params.group_checksum(p));
  return j;
}

}  // namespace

void cmd_train(const RunConfig& cfg, const TrainOptions& opt) {
  ensure_out_dir(cfg);
  require_file(paths::train_store(cfg.out_dir), "run `preprocess` first");
  auto windows = load_windows(paths::train_store(cfg.out_dir));

  TemplateBank bank = load_bank(cfg);
  Tokenizer tok = build_tokenizer(bank);
  ModelConfig mc = bind_model_config(cfg, windows, tok);
  tok.save(paths::vocab(cfg.out_dir));

  ParamStore params = init_params(mc, derive_seed(cfg.seed, "init"));

  auto skipped = [&](int k) {
    return std::find(opt.skip.begin(), opt.skip.end(), k) != opt.skip.end();
  };
  bool run_stage[4] = {false, false, false, false};
  if (opt.stages == "all") {
    for (int k = 1; k <= 3; ++k) run_stage[k] = !skipped(k);
  } else if (opt.stages == "1" || opt.stages == "2" || opt.stages == "3") {
    int k = opt.stages[0] - '0';
    E2_CHECK(!skipped(k), "cannot both run and skip stage " + opt.stages);
    run_stage[k] = true;
    // load prerequisite products (or leave them at random init when skipped)
    for (int p = 1; p < k; ++p) {
      if (skipped(p)) continue;
      std::string ck = paths::stage_ckpt(cfg.out_dir, p);
      if (!fs::exists(ck))
        throw ConfigError("missing prerequisite checkpoint " + ck +
                          " (run stage " + std::to_string(p) + " first or pass --skip-stage " +
                          std::to_string(p) + ")");
      load_into(params, ck);
    }
  } else {
    throw ConfigError("--stage expects 1, 2, 3 or all, got '" + opt.stages + "'");
  }

  // stage 3 uses a uniform subsample of the training samples
  std::vector<QASample> samples;
  std::unordered_map<std::string, Window> window_map;
  if (run_stage[2] || run_stage[3]) {
    require_file(paths::train_jsonl(cfg.out_dir), "run `synthesize` first");
    samples = deserialize_samples(paths::train_jsonl(cfg.out_dir));
    for (auto& w : windows) window_map.emplace(w.window_id, w);
  }

  if (opt.resume) {
    bool any_state = false;
    for (int k = 1; k <= 3; ++k)
      if (run_stage[k] && fs::exists(paths::stage_state(cfg.out_dir, k))) any_state = true;
    if (!any_state)
      throw ConfigError("--resume given but no stage state snapshot exists under " + cfg.out_dir +
                        " (train with --checkpoint-every first)");
  }

  json summary;
  summary["config_hash"] = cfg.config_hash();
  summary["ablations"] = json::array();
  for (int k = 1; k <= 3; ++k)
    if (skipped(k)) summary["ablations"].push_back("w/o Stage " + std::to_string(k));
  if (!cfg.cot) summary["ablations"].push_back("w/o CoT format");
  summary["stages"] = json::array();

  int64_t ckpt_every = opt.checkpoint_every > 0 ? opt.checkpoint_every : cfg.checkpoint_every;
  auto run_one = [&](int k) {
    StagePlan plan = k == 1 ? cfg.stage1 : (k == 2 ? cfg.stage2 : cfg.stage3);
    plan.stage = k;
    plan.checkpoint_every = ckpt_every;
    plan.state_path = paths::stage_state(cfg.out_dir, k);
    if (opt.resume && fs::exists(paths::stage_state(cfg.out_dir, k)))
      plan.resume_from = paths::stage_state(cfg.out_dir, k);

    auto frozen = stage_frozen_prefixes(k);
    json before = checksum_record(params, frozen);
    StageResult res;
    auto t0 = std::chrono::steady_clock::now();
    if (k == 1) {
      res = stage1_run(params, mc, windows, plan, derive_seed(cfg.seed, "stage1"));
    } else if (k == 2) {
      res = stage2_run(params, mc, tok, samples, window_map, plan, derive_seed(cfg.seed, "stage2"));
    } else {
      std::vector<QASample> subset = samples;
      Rng rng(derive_seed(cfg.seed, "stage3-subset"));
      rng.shuffle(subset);
      if (static_cast<int64_t>(subset.size()) > cfg.stage3_samples)
        subset.resize(static_cast<size_t>(cfg.stage3_samples));
      res = stage3_run(params, mc, tok, subset, window_map, plan, derive_seed(cfg.seed, "stage3"));
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json after = checksum_record(params, frozen);

    save_checkpoint(paths::stage_ckpt(cfg.out_dir, k), params);
    save_loss_curve(paths::loss_csv(cfg.out_dir, k), res.curve);

    json srec;
    srec["stage"] = k;
    srec["status"] = "ran";
    srec["steps"] = res.curve.size();
    srec["final_loss"] = res.final_loss;
    if (res.train_accuracy >= 0) srec["train_accuracy"] = res.train_accuracy;
    srec["trainable_params"] = res.trainable_params;
    srec["frozen_checksums_before"] = before;
    srec["frozen_checksums_after"] = after;
    srec["frozen_intact"] = (before == after);
    summary["stages"].push_back(srec);
    std::printf("stage %d: %zu steps, final loss %.4f%s (%.1fs)\n", k, res.curve.size(),
                res.final_loss,
                res.train_accuracy >= 0
                    ? (", train acc " + std::to_string(res.train_accuracy)).c_str()
                    : "",
                elapsed);
    E2_CHECK(before == after, "stage " + std::to_string(k) + " modified frozen parameters");
  };

  for (int k = 1; k <= 3; ++k) {
    if (run_stage[k]) {
      run_one(k);
    } else if (opt.stages == "all") {
      json srec;
      srec["stage"] = k;
      srec["status"] = "skipped";
      summary["stages"].push_back(srec);
      std::printf("stage %d: skipped (random-init product)\n", k);
    }
  }

  bool lora_active = run_stage[3] || (opt.stages == "all" && !skipped(3));
  // a single-stage run inherits lora_active from an earlier summary when stage 3 already ran
  if (opt.stages == "3") lora_active = true;
  if (opt.stages == "1" || opt.stages == "2") lora_active = false;
  save_model_config(paths::model_config(cfg.out_dir), mc, lora_active);
  save_checkpoint(paths::final_ckpt(cfg.out_dir), params);
  write_text(paths::train_summary(cfg.out_dir), summary.dump(2) + "\n");
}

// ---------------------------------------------------------------- evaluate

EvalOutcome cmd_evaluate(const RunConfig& cfg, const std::string& source_override) {
  ensure_out_dir(cfg);
  std::string source = source_override.empty() ? cfg.eval_source : source_override;

  require_file(paths::eval_ied(cfg.out_dir), "run `synthesize` first");
  EvalSets sets;
  sets.ied = deserialize_samples(paths::eval_ied(cfg.out_dir));
  sets.multi = deserialize_samples(paths::eval_multi(cfg.out_dir));
  sets.esr = deserialize_samples(paths::eval_esr(cfg.out_dir));

  std::unique_ptr<ResponseSource> src;
  std::unordered_map<std::string, Window> window_map;
  ParamStore params;
  ModelConfig mc;
  Tokenizer tok;
  if (source == "model") {
    require_file(paths::final_ckpt(cfg.out_dir), "run `train` first");
    require_file(paths::model_config(cfg.out_dir), "run `train` first");
    require_file(paths::vocab(cfg.out_dir), "run `train` first");
    require_file(paths::test_store(cfg.out_dir), "run `preprocess` first");
    bool lora_active = false;
    mc = load_model_config(paths::model_config(cfg.out_dir), lora_active);
    tok = Tokenizer::from_file(paths::vocab(cfg.out_dir));
    E2_CHECK(tok.vocab_size() == mc.vocab, "vocab file does not match the trained model");
    params = init_params(mc, derive_seed(cfg.seed, "init"));
    load_into(params, paths::final_ckpt(cfg.out_dir));
    for (auto& w : load_windows(paths::test_store(cfg.out_dir))) window_map.emplace(w.window_id, w);
    auto lookup = [&window_map](const std::string& id) -> const Window& {
      auto it = window_map.find(id);
      E2_CHECK(it != window_map.end(), "eval sample references missing window '" + id + "'");
      return it->second;
    };
    src = std::make_unique<ModelSource>(params, mc, tok, lookup, lora_active, cfg.gen_max_tokens);
  } else if (source == "file") {
    if (cfg.answers_file.empty())
      throw ConfigError("eval.answers_file must be set for --source file");
    require_file(cfg.answers_file, "eval.answers_file");
    src = std::make_unique<FileSource>(cfg.answers_file);
  } else if (source == "endpoint") {
    if (cfg.endpoint_url.empty())
      throw ConfigError("eval.endpoint_url must be set for --source endpoint");
    const char* token = std::getenv(cfg.token_env.c_str());
    src = std::make_unique<EndpointSource>(cfg.endpoint_url, cfg.endpoint_model,
                                           token ? token : "");
  } else {
    throw ConfigError("--source expects model, file or endpoint, got '" + source + "'");
  }

  EvalOutcome outcome = run_eval(*src, sets);
  write_report_json(paths::report_json(cfg.out_dir), outcome, cfg.config_hash());
  write_confusion_csv(paths::confusion_csv(cfg.out_dir), outcome.report.confusion);
  std::fputs(render_report(outcome.report).c_str(), stdout);
  return outcome;
}

// ---------------------------------------------------------------- report

namespace {

json maybe_json(const std::string& path) {
  if (!fs::exists(path)) return json();
  try {
    return json::parse(read_text(path));
  } catch (...) {
    return json();
  }
}

struct CurveSummary {
  bool present = false;
  double first_loss = 0, last_loss = 0;
  int64_t steps = 0;
};

CurveSummary summarize_curve(const std::string& path) {
  CurveSummary s;
  if (!fs::exists(path)) return s;
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);  // header
  bool first = true;
  while (std::getline(is, line)) {
    auto parts = split(line, ',');
    if (parts.size() != 3) continue;
    double loss = std::stod(parts[2]);
    if (first) {
      s.first_loss = loss;
      first = false;
    }
    s.last_loss = loss;
    s.steps++;
  }
  s.present = s.steps > 0;
  return s;
}

void append_run_row(std::string& md, const std::string& name, const std::string& dir) {
  json summary = maybe_json(paths::train_summary(dir));
  json report = maybe_json(paths::report_json(dir));
  std::string label = "full";
  if (summary.contains("ablations") && !summary["ablations"].empty()) {
    label = "";
    for (const auto& a : summary["ablations"]) label += (label.empty() ? "" : " + ") + a.get<std::string>();
  }
  char buf[256];
  std::string bal = "-", kap = "-", f1 = "-", multi = "-";
  if (report.contains("balanced_accuracy")) {
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * report["balanced_accuracy"].get<double>());
    bal = buf;
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * report["cohens_kappa"].get<double>());
    kap = buf;
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * report["weighted_f1"].get<double>());
    f1 = buf;
  }
  if (report.contains("task_accuracy") && !report["task_accuracy"].empty()) {
    double sum = 0;
    int n = 0;
    for (const auto& [t, acc] : report["task_accuracy"].items()) {
      sum += acc.get<double>();
      ++n;
    }
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * sum / n);
    multi = buf;
  }
  md += "| " + name + " | " + label + " | " + bal + " | " + kap + " | " + f1 + " | " + multi +
        " |\n";
}

}  // namespace

void cmd_report(const std::string& run_dir) {
  E2_CHECK(fs::is_directory(run_dir), "run directory '" + run_dir + "' does not exist");
  bool any = fs::exists(paths::config_resolved(run_dir)) ||
             fs::exists(paths::train_summary(run_dir)) || fs::exists(paths::report_json(run_dir));
  E2_CHECK(any, "run directory '" + run_dir + "' has no artifacts to report");

  std::string md = "# Run report\n\n";

  if (fs::exists(paths::config_resolved(run_dir))) {
    std::string cfg_text = read_text(paths::config_resolved(run_dir));
    md += "## Configuration\n\nconfig hash `" + hex64(fnv1a64(cfg_text)) + "`\n\n";
    md += "<details><summary>resolved configuration</summary>\n\n```\n" + cfg_text +
          "```\n\n</details>\n\n";
  } else {
    md += "## Configuration\n\n_absent_\n\n";
  }

  md += "## Training\n\n";
  json summary = maybe_json(paths::train_summary(run_dir));
  if (summary.is_null()) {
    md += "_absent_\n\n";
  } else {
    md += "| stage | status | steps | final loss | train acc | trainable params | frozen intact |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& s : summary["stages"]) {
      char buf[64];
      std::string loss = "-", acc = "-", steps = "-", tp = "-", intact = "-";
      if (s.contains("final_loss")) {
        std::snprintf(buf, sizeof(buf), "%.4f", s["final_loss"].get<double>());
        loss = buf;
      }
      if (s.contains("train_accuracy")) {
        std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * s["train_accuracy"].get<double>());
        acc = buf;
      }
      if (s.contains("steps")) steps = std::to_string(s["steps"].get<int64_t>());
      if (s.contains("trainable_params")) tp = std::to_string(s["trainable_params"].get<int64_t>());
      if (s.contains("frozen_intact")) intact = s["frozen_intact"].get<bool>() ? "yes" : "NO";
      md += "| " + std::to_string(s["stage"].get<int>()) + " | " + s["status"].get<std::string>() +
            " | " + steps + " | " + loss + " | " + acc + " | " + tp + " | " + intact + " |\n";
    }
    md += "\n";
    for (int k = 1; k <= 3; ++k) {
      auto cs = summarize_curve(paths::loss_csv(run_dir, k));
      if (cs.present) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "- stage %d loss: %.4f -> %.4f over %lld steps\n", k,
                      cs.first_loss, cs.last_loss, static_cast<long long>(cs.steps));
        md += buf;
      }
    }
    md += "\n";
  }

  md += "## Evaluation\n\n";
  json report = maybe_json(paths::report_json(run_dir));
  if (report.is_null()) {
    md += "_absent_\n\n";
  } else {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "balanced accuracy **%.2f%%**, Cohen's kappa **%.2f%%**, weighted F1 "
                  "**%.2f%%**, parse failures %.2f%%\n\n",
                  100.0 * report["balanced_accuracy"].get<double>(),
                  100.0 * report["cohens_kappa"].get<double>(),
                  100.0 * report["weighted_f1"].get<double>(),
                  100.0 * report["parse_failure_rate"].get<double>());
    md += buf;
    if (report.contains("task_accuracy") && !report["task_accuracy"].empty()) {
      md += "| task | accuracy |\n|---|---|\n";
      for (const auto& [t, acc] : report["task_accuracy"].items()) {
        std::snprintf(buf, sizeof(buf), "| %s | %.2f%% |\n", t.c_str(), 100.0 * acc.get<double>());
        md += buf;
      }
      md += "\n";
    }
  }

  // ablation grid: this run plus any child run directories
  md += "## Ablation grid\n\n";
  md += "| run | variant | balanced acc | kappa | weighted F1 | multi-task avg |\n";
  md += "|---|---|---|---|---|---|\n";
  append_run_row(md, ".", run_dir);
  std::vector<std::string> children;
  for (const auto& entry : fs::directory_iterator(run_dir))
    if (entry.is_directory() && fs::exists(paths::train_summary(entry.path().string())))
      children.push_back(entry.path().filename().string());
  std::sort(children.begin(), children.end());
  for (const auto& c : children) append_run_row(md, c, run_dir + "/" + c);
  md += "\n";

  write_text(run_dir + "/report.md", md);
  std::printf("wrote %s/report.md\n", run_dir.c_str());
}

}  // namespace e2
