#pragma once

#include <string>
#include <vector>

#include "e2/dataset.hpp"
#include "e2/model.hpp"
#include "e2/signal.hpp"
#include "e2/train.hpp"

namespace e2 {

// Whole-run configuration. Plain-text "section.key = value" file with CLI
// overrides; precedence CLI > file > preset defaults. Unknown keys are
// configuration errors.
struct RunConfig {
  uint64_t seed = 42;
  std::string out_dir = "runs/desk";
  std::string preset = "desk";  // desk | paper

  // signal / fixture generation
  PreprocessConfig signal;
  std::string input_dir;  // ingestion directory; empty = synthetic fixtures
  int64_t synthetic_channels = 8;
  double synthetic_fs = 1000.0;
  double synthetic_duration_s = 100.0;
  int64_t synthetic_per_emotion = 10;  // recordings per emotion
  double test_fraction = 0.3;          // fraction of recordings held out

  // dataset synthesis
  int64_t train_samples = 400;
  TaskMix mix;
  EvalCounts eval_counts{20, 20, 20, 20};
  bool cot = true;
  std::string bank_path;  // empty = built-in bank

  // model dims (channels/window_samples/vocab are bound at train time)
  ModelConfig model;

  // curriculum
  StagePlan stage1, stage2, stage3;
  int64_t stage3_samples = 200;
  int64_t checkpoint_every = 0;

  // evaluation
  std::string eval_source = "model";  // model | file | endpoint
  std::string answers_file;
  std::string endpoint_url;
  std::string endpoint_model = "default";
  std::string token_env = "E2_EVAL_TOKEN";
  int64_t gen_max_tokens = 96;

  static RunConfig with_preset(const std::string& preset);
  // file may be empty (defaults only); sets are "section.key=value" strings
  static RunConfig load(const std::string& config_path, const std::vector<std::string>& sets);

  void apply(const std::string& key, const std::string& value);
  // canonical resolved form, one "key = value" per line
  std::string dump() const;
  std::string config_hash() const;  // fnv-1a over dump()
};

}  // namespace e2
