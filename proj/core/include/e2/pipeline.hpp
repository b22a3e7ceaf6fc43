#pragma once

#include <string>
#include <vector>

#include "e2/config.hpp"
#include "e2/eval.hpp"

namespace e2 {

// Command-level orchestration used by the CLI (and exercised directly by
// tests). All paths are rooted at cfg.out_dir; every command is deterministic
// given (config, seed).

struct TrainOptions {
  std::string stages = "all";  // "1" | "2" | "3" | "all"
  std::vector<int> skip;       // stages whose product is left at random init
  bool resume = false;
  int64_t checkpoint_every = 0;
};

// synthetic_n > 0 generates that many fixture recordings (split across the
// seven emotions) instead of reading cfg.input_dir
void cmd_preprocess(const RunConfig& cfg, int64_t synthetic_n = 0);
void cmd_synthesize(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg, const TrainOptions& opt = {});
EvalOutcome cmd_evaluate(const RunConfig& cfg, const std::string& source_override = "");
void cmd_report(const std::string& run_dir);

TemplateBank load_bank(const RunConfig& cfg);
Tokenizer build_tokenizer(const TemplateBank& bank);

// artifact paths under an output directory
namespace paths {
std::string train_store(const std::string& out_dir);
std::string test_store(const std::string& out_dir);
std::string train_jsonl(const std::string& out_dir);
std::string eval_ied(const std::string& out_dir);
std::string eval_multi(const std::string& out_dir);
std::string eval_esr(const std::string& out_dir);
std::string stage_ckpt(const std::string& out_dir, int stage);
std::string stage_state(const std::string& out_dir, int stage);
std::string final_ckpt(const std::string& out_dir);
std::string loss_csv(const std::string& out_dir, int stage);
std::string vocab(const std::string& out_dir);
std::string model_config(const std::string& out_dir);
std::string train_summary(const std::string& out_dir);
std::string report_json(const std::string& out_dir);
std::string confusion_csv(const std::string& out_dir);
std::string config_resolved(const std::string& out_dir);
}  // namespace paths

}  // namespace e2
