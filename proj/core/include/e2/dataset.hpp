#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "e2/signal.hpp"
#include "e2/template_bank.hpp"

namespace e2 {

struct Turn {
  std::string role;  // "user" | "assistant"
  std::string text;
};

// One instruction-tuning conversation. User turns reference EEG windows via
// literal "<eeg:k>" placeholders into eeg_refs.
struct QASample {
  std::string id;
  TaskType task = TaskType::IED;
  std::vector<std::string> eeg_refs;  // window ids, each referenced exactly once
  std::vector<Turn> turns;
  std::string answer_key;  // emotion token | yes/no | a/b/c | "1-a,2-b,3-c"
  std::vector<Emotion> meta_emotions;  // label of each referenced window
};

struct SynthOptions {
  bool cot = true;  // false mirrors the answer-only ablation format
};

QASample synthesize_ied(const Window& w, const TemplateBank& bank, Rng& rng,
                        const SynthOptions& opt = {});
// probe is drawn from the two labels when not forced; emitted pairs always
// have exactly one side matching the probe, so the key is label-decidable.
QASample synthesize_epc(const Window& w1, const Window& w2, const TemplateBank& bank, Rng& rng,
                        const SynthOptions& opt = {}, std::optional<Emotion> probe = {});
QASample synthesize_ess(const Window& w1, const Window& w2, const Window& w3,
                        const TemplateBank& bank, Rng& rng, const SynthOptions& opt = {},
                        std::optional<Emotion> probe = {});
// scenario_to_segment maps situation slot k (0-based) to window index
QASample synthesize_eim(const Window& w1, const Window& w2, const Window& w3,
                        const TemplateBank& bank, Rng& rng, const SynthOptions& opt = {},
                        std::optional<std::array<int, 3>> scenario_to_segment = {});
QASample synthesize_esr(const Window& w1, const Window& w2, const Window& w3,
                        const TemplateBank& bank, Rng& rng, const SynthOptions& opt = {},
                        std::optional<int> target = {});

struct TaskMix {
  double ied = 0.25, epc = 0.25, ess = 0.25, eim = 0.25;
  void validate() const;
};

// Exactly n samples over IED/EPC/ESS/EIM with per-emotion usage balanced.
std::vector<QASample> build_training_set(const std::vector<Window>& windows, int64_t n,
                                         const TaskMix& mix, const TemplateBank& bank,
                                         uint64_t seed, const SynthOptions& opt = {});

struct EvalCounts {
  int64_t epc = 167, ess = 167, eim = 166;  // "multi" split, 500 total by default
  int64_t esr = 167;
};

struct EvalSets {
  std::vector<QASample> ied;    // one per test window
  std::vector<QASample> multi;  // EPC + ESS + EIM
  std::vector<QASample> esr;
};

// train_ids, when given, is checked for overlap with the test window ids.
EvalSets build_eval_set(const std::vector<Window>& test_windows, const TemplateBank& bank,
                        uint64_t seed, const EvalCounts& counts = {}, const SynthOptions& opt = {},
                        const std::set<std::string>* train_ids = nullptr);

void serialize_samples(const std::string& path, const std::vector<QASample>& samples);
std::vector<QASample> deserialize_samples(const std::string& path);

// structural checks; throw with a reason on violation
void validate_sample(const QASample& s);
void validate_cot(const QASample& s, bool cot);

// fixed phrases the synthesizers emit besides bank text (for vocab building)
std::vector<std::string> dataset_vocabulary_extras();

// total eeg_ref usage per emotion across a sample set
std::array<int64_t, kNumEmotions> emotion_usage(const std::vector<QASample>& samples);

}  // namespace e2
