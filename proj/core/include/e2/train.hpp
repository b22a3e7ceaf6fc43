#pragma once

#include <array>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "e2/model.hpp"

namespace e2 {

enum class ScheduleKind { one_cycle, cosine };
ScheduleKind parse_schedule(const std::string& s);
std::string to_string(ScheduleKind k);

// one_cycle: cosine ramp peak/25 -> peak over the first 30% of steps, then
// cosine decay to peak/1e4. cosine: peak * (1 + cos(pi * step/total)) / 2.
double lr_schedule(ScheduleKind kind, int64_t step, int64_t total_steps, double peak_lr);

struct AdamState {
  std::map<std::string, std::vector<double>> m, v;
  int64_t step = 0;
};

// Bias-corrected Adam update on one parameter buffer. Decoupled mode applies
// lr*wd shrinkage before the Adam delta; plain mode ignores weight_decay.
void adam_update_inplace(std::vector<double>& value, const std::vector<double>& grad,
                         std::vector<double>& m, std::vector<double>& v, int64_t step, double lr,
                         double weight_decay, bool decoupled, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8);

// Steps every named parameter off its accumulated gradient.
void adam_step(ParamStore& params, const std::vector<std::string>& names, AdamState& state,
               double lr, double weight_decay, bool decoupled);

struct StagePlan {
  int stage = 1;  // 1 | 2 | 3
  int64_t epochs = 1;
  int64_t batch_size = 8;
  double peak_lr = 1e-3;
  double weight_decay = 0.0;
  bool decoupled = false;
  ScheduleKind schedule = ScheduleKind::cosine;
  // mid-stage state snapshots every k epochs (0 = never) and optional resume
  int64_t checkpoint_every = 0;
  std::string state_path;
  std::string resume_from;
};

struct StageResult {
  std::vector<std::array<double, 3>> curve;  // step, lr, loss
  double final_loss = 0.0;
  double train_accuracy = -1.0;  // stage 1 only
  int64_t trainable_params = 0;
};

// trainable prefixes per curriculum stage:
//   1: encoder+classifier   2: projector   3: projector+lora
std::vector<std::string> stage_trainable_prefixes(int stage);
std::vector<std::string> stage_frozen_prefixes(int stage);
// flips requires_grad per group; returns the trainable parameter names
std::vector<std::string> apply_stage_freezing(ParamStore& params, int stage);

// Stage 1: encoder + classification head, cross-entropy over windows.
StageResult stage1_run(ParamStore& params, const ModelConfig& cfg,
                       const std::vector<Window>& windows, const StagePlan& plan, uint64_t seed);

// Stages 2/3: masked next-token loss over QA samples (stage 3 engages LoRA).
StageResult stage2_run(ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                       const std::vector<QASample>& samples,
                       const std::unordered_map<std::string, Window>& windows,
                       const StagePlan& plan, uint64_t seed);
StageResult stage3_run(ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                       const std::vector<QASample>& samples,
                       const std::unordered_map<std::string, Window>& windows,
                       const StagePlan& plan, uint64_t seed);

double stage1_train_accuracy(const ParamStore& params, const ModelConfig& cfg,
                             const std::vector<Window>& windows);

void save_loss_curve(const std::string& path, const std::vector<std::array<double, 3>>& curve);

}  // namespace e2
