#include "e2/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace e2 {

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    E2_CHECK(used == v.size(), "trailing characters");
    return x;
  } catch (...) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

int64_t to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    long long x = std::stoll(v, &used);
    E2_CHECK(used == v.size(), "trailing characters");
    return static_cast<int64_t>(x);
  } catch (...) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string u = lowercase(v);
  if (u == "true" || u == "1" || u == "yes" || u == "on") return true;
  if (u == "false" || u == "0" || u == "no" || u == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

ScheduleKind to_schedule(const std::string& key, const std::string& v) {
  try {
    return parse_schedule(v);
  } catch (...) {
    throw ConfigError("config: '" + key + "' expects one_cycle or cosine, got '" + v + "'");
  }
}

void apply_stage_key(StagePlan& plan, const std::string& key, const std::string& field,
                     const std::string& value) {
  if (field == "epochs")
    plan.epochs = to_int(key, value);
  else if (field == "batch")
    plan.batch_size = to_int(key, value);
  else if (field == "lr")
    plan.peak_lr = to_double(key, value);
  else if (field == "weight_decay")
    plan.weight_decay = to_double(key, value);
  else if (field == "schedule")
    plan.schedule = to_schedule(key, value);
  else
    throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

RunConfig RunConfig::with_preset(const std::string& preset) {
  RunConfig c;
  c.preset = preset;
  // stage kinds follow the published recipe in both presets: decoupled decay
  // + one-cycle for stage 1, plain adam + cosine for stages 2 and 3
  c.stage1 = {1, 12, 16, 2e-3, 0.01, true, ScheduleKind::one_cycle, 0, "", ""};
  c.stage2 = {2, 6, 8, 2e-3, 0.0, false, ScheduleKind::cosine, 0, "", ""};
  c.stage3 = {3, 6, 8, 2e-3, 0.0, false, ScheduleKind::cosine, 0, "", ""};
  if (preset == "desk") {
    return c;
  }
  if (preset == "paper") {
    c.out_dir = "runs/paper";
    c.synthetic_channels = 62;
    c.synthetic_per_emotion = 20;
    c.signal.channel_subset.clear();
    for (int i = 0; i < 58; ++i) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "CH%02d", i);
      c.signal.channel_subset.push_back(buf);
    }
    c.train_samples = 10000;
    c.eval_counts = {167, 167, 166, 167};
    c.stage3_samples = 3000;
    c.stage1 = {1, 50, 64, 1e-4, 0.01, true, ScheduleKind::one_cycle, 0, "", ""};
    c.stage2 = {2, 3, 16, 2e-4, 0.0, false, ScheduleKind::cosine, 0, "", ""};
    c.stage3 = {3, 3, 16, 2e-4, 0.0, false, ScheduleKind::cosine, 0, "", ""};
    c.model.lora_rank = 128;
    c.model.lora_alpha = 256.0;
    c.model.max_seq = 512;
    c.model.codebook_size = 64;
    return c;
  }
  throw ConfigError("config: unknown preset '" + preset + "' (expected desk or paper)");
}

void RunConfig::apply(const std::string& key, const std::string& value) {
  const std::string& k = key;
  const std::string& v = value;
  // run
  if (k == "run.seed") seed = static_cast<uint64_t>(to_int(k, v));
  else if (k == "run.out_dir") out_dir = v;
  else if (k == "run.preset") { /* consumed in load() before other keys */ }
  // signal
  else if (k == "signal.band_low_hz") signal.band_low_hz = to_double(k, v);
  else if (k == "signal.band_high_hz") signal.band_high_hz = to_double(k, v);
  else if (k == "signal.notch_hz") signal.notch_hz = to_double(k, v);
  else if (k == "signal.fs_target") signal.fs_target = to_double(k, v);
  else if (k == "signal.segment_seconds") signal.segment_seconds = to_double(k, v);
  else if (k == "signal.window_seconds") signal.window_seconds = to_double(k, v);
  else if (k == "signal.scale_to_mv") signal.scale_to_mv = to_double(k, v);
  else if (k == "signal.crops_per_segment") signal.crops_per_segment = static_cast<int>(to_int(k, v));
  else if (k == "signal.channel_subset") {
    signal.channel_subset.clear();
    if (!trim(v).empty())
      for (auto& name : split(v, ',')) signal.channel_subset.push_back(trim(name));
  }
  else if (k == "signal.input_dir") input_dir = v;
  else if (k == "signal.synthetic_channels") synthetic_channels = to_int(k, v);
  else if (k == "signal.synthetic_fs") synthetic_fs = to_double(k, v);
  else if (k == "signal.synthetic_duration_s") synthetic_duration_s = to_double(k, v);
  else if (k == "signal.synthetic_per_emotion") synthetic_per_emotion = to_int(k, v);
  else if (k == "signal.test_fraction") test_fraction = to_double(k, v);
  // dataset
  else if (k == "dataset.train_samples") train_samples = to_int(k, v);
  else if (k == "dataset.mix") {
    // "ied:0.25,epc:0.25,ess:0.25,eim:0.25"
    TaskMix m{0, 0, 0, 0};
    for (auto& part : split(v, ',')) {
      auto kv = split(trim(part), ':');
      if (kv.size() != 2) throw ConfigError("config: bad mix entry '" + part + "'");
      std::string task = lowercase(trim(kv[0]));
      double w = to_double(k, trim(kv[1]));
      if (task == "ied") m.ied = w;
      else if (task == "epc") m.epc = w;
      else if (task == "ess") m.ess = w;
      else if (task == "eim") m.eim = w;
      else throw ConfigError("config: mix may only contain ied/epc/ess/eim, got '" + task + "'");
    }
    mix = m;
  }
  else if (k == "dataset.eval_epc") eval_counts.epc = to_int(k, v);
  else if (k == "dataset.eval_ess") eval_counts.ess = to_int(k, v);
  else if (k == "dataset.eval_eim") eval_counts.eim = to_int(k, v);
  else if (k == "dataset.eval_esr") eval_counts.esr = to_int(k, v);
  else if (k == "dataset.cot") cot = to_bool(k, v);
  else if (k == "dataset.bank_path") bank_path = v;
  // model
  else if (k == "model.d_e") model.d_e = to_int(k, v);
  else if (k == "model.d_h") model.d_h = to_int(k, v);
  else if (k == "model.d_llm") model.d_llm = to_int(k, v);
  else if (k == "model.patch_len") model.patch_len = to_int(k, v);
  else if (k == "model.encoder_heads") model.encoder_heads = static_cast<int>(to_int(k, v));
  else if (k == "model.spatial_layers") model.spatial_layers = static_cast<int>(to_int(k, v));
  else if (k == "model.temporal_layers") model.temporal_layers = static_cast<int>(to_int(k, v));
  else if (k == "model.summary_tokens") model.summary_tokens = to_int(k, v);
  else if (k == "model.codebook_size") model.codebook_size = to_int(k, v);
  else if (k == "model.lm_layers") model.lm_layers = static_cast<int>(to_int(k, v));
  else if (k == "model.lm_heads") model.lm_heads = static_cast<int>(to_int(k, v));
  else if (k == "model.max_seq") model.max_seq = to_int(k, v);
  else if (k == "model.ff_mult") model.ff_mult = static_cast<int>(to_int(k, v));
  else if (k == "model.lora_rank") model.lora_rank = to_int(k, v);
  else if (k == "model.lora_alpha") model.lora_alpha = to_double(k, v);
  else if (k == "model.lora_dropout") model.lora_dropout = to_double(k, v);
  // train
  else if (k.rfind("train.stage1.", 0) == 0) apply_stage_key(stage1, k, k.substr(13), v);
  else if (k.rfind("train.stage2.", 0) == 0) apply_stage_key(stage2, k, k.substr(13), v);
  else if (k.rfind("train.stage3.", 0) == 0) apply_stage_key(stage3, k, k.substr(13), v);
  else if (k == "train.stage3_samples") stage3_samples = to_int(k, v);
  else if (k == "train.checkpoint_every") checkpoint_every = to_int(k, v);
  // eval
  else if (k == "eval.source") {
    std::string s = lowercase(v);
    if (s != "model" && s != "file" && s != "endpoint")
      throw ConfigError("config: eval.source must be model, file or endpoint");
    eval_source = s;
  }
  else if (k == "eval.answers_file") answers_file = v;
  else if (k == "eval.endpoint_url") endpoint_url = v;
  else if (k == "eval.endpoint_model") endpoint_model = v;
  else if (k == "eval.token_env") token_env = v;
  else if (k == "eval.max_tokens") gen_max_tokens = to_int(k, v);
  else
    throw ConfigError("config: unknown key '" + k + "'");
}

RunConfig RunConfig::load(const std::string& config_path, const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> pairs;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is.good()) throw ConfigError("config file '" + config_path + "' cannot be opened");
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config file '" + config_path + "' line " + std::to_string(line_no) +
                          ": expected 'key = value'");
      pairs.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }
  for (const auto& s : sets) {
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    pairs.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }

  std::string preset = "desk";
  for (const auto& [k, v] : pairs)
    if (k == "run.preset") preset = v;
  RunConfig cfg = with_preset(preset);
  for (const auto& [k, v] : pairs) cfg.apply(k, v);
  return cfg;
}

std::string RunConfig::dump() const {
  std::ostringstream os;
  auto num = [](double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return std::string(buf);
  };
  os << "run.preset = " << preset << "\n";
  os << "run.seed = " << seed << "\n";
  os << "run.out_dir = " << out_dir << "\n";
  os << "signal.band_low_hz = " << num(signal.band_low_hz) << "\n";
  os << "signal.band_high_hz = " << num(signal.band_high_hz) << "\n";
  os << "signal.notch_hz = " << num(signal.notch_hz) << "\n";
  os << "signal.fs_target = " << num(signal.fs_target) << "\n";
  os << "signal.segment_seconds = " << num(signal.segment_seconds) << "\n";
  os << "signal.window_seconds = " << num(signal.window_seconds) << "\n";
  os << "signal.scale_to_mv = " << num(signal.scale_to_mv) << "\n";
  os << "signal.crops_per_segment = " << signal.crops_per_segment << "\n";
  {
    std::string subset;
    for (size_t i = 0; i < signal.channel_subset.size(); ++i) {
      if (i) subset += ",";
      subset += signal.channel_subset[i];
    }
    os << "signal.channel_subset = " << subset << "\n";
  }
  os << "signal.input_dir = " << input_dir << "\n";
  os << "signal.synthetic_channels = " << synthetic_channels << "\n";
  os << "signal.synthetic_fs = " << num(synthetic_fs) << "\n";
  os << "signal.synthetic_duration_s = " << num(synthetic_duration_s) << "\n";
  os << "signal.synthetic_per_emotion = " << synthetic_per_emotion << "\n";
  os << "signal.test_fraction = " << num(test_fraction) << "\n";
  os << "dataset.train_samples = " << train_samples << "\n";
  os << "dataset.mix = ied:" << num(mix.ied) << ",epc:" << num(mix.epc) << ",ess:" << num(mix.ess)
     << ",eim:" << num(mix.eim) << "\n";
  os << "dataset.eval_epc = " << eval_counts.epc << "\n";
  os << "dataset.eval_ess = " << eval_counts.ess << "\n";
  os << "dataset.eval_eim = " << eval_counts.eim << "\n";
  os << "dataset.eval_esr = " << eval_counts.esr << "\n";
  os << "dataset.cot = " << (cot ? "true" : "false") << "\n";
  os << "dataset.bank_path = " << bank_path << "\n";
  os << "model.d_e = " << model.d_e << "\n";
  os << "model.d_h = " << model.d_h << "\n";
  os << "model.d_llm = " << model.d_llm << "\n";
  os << "model.patch_len = " << model.patch_len << "\n";
  os << "model.encoder_heads = " << model.encoder_heads << "\n";
  os << "model.spatial_layers = " << model.spatial_layers << "\n";
  os << "model.temporal_layers = " << model.temporal_layers << "\n";
  os << "model.summary_tokens = " << model.summary_tokens << "\n";
  os << "model.codebook_size = " << model.codebook_size << "\n";
  os << "model.lm_layers = " << model.lm_layers << "\n";
  os << "model.lm_heads = " << model.lm_heads << "\n";
  os << "model.max_seq = " << model.max_seq << "\n";
  os << "model.ff_mult = " << model.ff_mult << "\n";
  os << "model.lora_rank = " << model.lora_rank << "\n";
  os << "model.lora_alpha = " << num(model.lora_alpha) << "\n";
  os << "model.lora_dropout = " << num(model.lora_dropout) << "\n";
  auto stage = [&](const char* name, const StagePlan& p) {
    os << "train." << name << ".epochs = " << p.epochs << "\n";
    os << "train." << name << ".batch = " << p.batch_size << "\n";
    os << "train." << name << ".lr = " << num(p.peak_lr) << "\n";
    os << "train." << name << ".weight_decay = " << num(p.weight_decay) << "\n";
    os << "train." << name << ".schedule = " << to_string(p.schedule) << "\n";
  };
  stage("stage1", stage1);
  stage("stage2", stage2);
  stage("stage3", stage3);
  os << "train.stage3_samples = " << stage3_samples << "\n";
  os << "train.checkpoint_every = " << checkpoint_every << "\n";
  os << "eval.source = " << eval_source << "\n";
  os << "eval.answers_file = " << answers_file << "\n";
  os << "eval.endpoint_url = " << endpoint_url << "\n";
  os << "eval.endpoint_model = " << endpoint_model << "\n";
  os << "eval.token_env = " << token_env << "\n";
  os << "eval.max_tokens = " << gen_max_tokens << "\n";
  return os.str();
}

std::string RunConfig::config_hash() const { return hex64(fnv1a64(dump())); }

}  // namespace e2
