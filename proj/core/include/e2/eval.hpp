#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "e2/dataset.hpp"
#include "e2/model.hpp"

namespace e2 {

struct Prediction {
  std::string sample_id;
  std::string raw_text;
  std::optional<std::string> parsed;  // nullopt == PARSE_FAIL, scored incorrect
  std::string gold;
  TaskType task = TaskType::IED;
};

// Total: never throws. Takes the LAST case-insensitive "answer:" and
// canonicalizes what follows (emotion synonyms, a/b/c, yes/no, EIM
// "1-a,2-b,3-c" lists). Without an answer line, falls back to the single
// unambiguous emotion word / choice letter in the final sentence.
std::optional<std::string> parse_answer(const std::string& text, TaskType task);

// rows = gold class, cols = predicted class + one overflow column for
// unparseable predictions
struct ConfusionMatrix {
  int classes = kNumEmotions;
  std::vector<int64_t> counts;

  explicit ConfusionMatrix(int c = kNumEmotions)
      : classes(c), counts(static_cast<size_t>(c) * (static_cast<size_t>(c) + 1), 0) {}
  int64_t& at(int gold, int pred) {
    return counts[static_cast<size_t>(gold) * (static_cast<size_t>(classes) + 1) +
                  static_cast<size_t>(pred)];
  }
  int64_t at(int gold, int pred) const {
    return counts[static_cast<size_t>(gold) * (static_cast<size_t>(classes) + 1) +
                  static_cast<size_t>(pred)];
  }
  int parse_fail_col() const { return classes; }
  int64_t total() const;
};

ConfusionMatrix confusion_from(const std::vector<Prediction>& ied_predictions);

double balanced_accuracy(const ConfusionMatrix& cm);  // mean per-class recall
double cohens_kappa(const ConfusionMatrix& cm);
double weighted_f1(const ConfusionMatrix& cm);
std::vector<double> per_class_recall(const ConfusionMatrix& cm);
// exact match rate; EIM requires the full permutation
double task_accuracy(const std::vector<Prediction>& predictions, TaskType task);

struct EvalReport {
  std::vector<double> recall;  // per emotion, canonical order
  double balanced_accuracy = 0.0;
  double kappa = 0.0;
  double weighted_f1 = 0.0;
  std::map<std::string, double> task_accuracy;  // EPC/ESS/EIM/ESR where present
  double parse_failure_rate = 0.0;
  ConfusionMatrix confusion;
  int64_t n_ied = 0, n_multi = 0, n_esr = 0;
};

// A source produces the final assistant response for a sample. Multi-turn
// samples (ESR) are driven turn by turn where the source supports it.
class ResponseSource {
 public:
  virtual ~ResponseSource() = default;
  virtual std::string respond(const QASample& s) = 0;
};

// greedy generation from the in-process model
class ModelSource : public ResponseSource {
 public:
  ModelSource(const ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
              std::function<const Window&(const std::string&)> window_by_id, bool use_lora,
              int64_t max_tokens = 96);
  std::string respond(const QASample& s) override;

 private:
  const ParamStore& params_;
  const ModelConfig& cfg_;
  const Tokenizer& tok_;
  std::function<const Window&(const std::string&)> window_by_id_;
  bool use_lora_;
  int64_t max_tokens_;
};

// JSON-lines answers file: {"id": ..., "text": ...} per line
class FileSource : public ResponseSource {
 public:
  explicit FileSource(const std::string& path);
  std::string respond(const QASample& s) override;

 private:
  std::map<std::string, std::string> answers_;
};

// HTTP chat endpoint: POST {"model", "messages":[{"role","text"}]} -> {"text"}.
// EEG placeholders are sent as literal "[EEG segment k]" stubs. Per-sample
// retries (3 attempts), then the sample scores as PARSE_FAIL.
class EndpointSource : public ResponseSource {
 public:
  EndpointSource(const std::string& url, const std::string& model_name,
                 const std::string& auth_token);
  std::string respond(const QASample& s) override;

 private:
  std::string call(const std::vector<Turn>& messages);
  std::string url_, model_, token_;
};

// test/simulation adapter
class CallbackSource : public ResponseSource {
 public:
  explicit CallbackSource(std::function<std::string(const QASample&)> fn) : fn_(std::move(fn)) {}
  std::string respond(const QASample& s) override { return fn_(s); }

 private:
  std::function<std::string(const QASample&)> fn_;
};

struct EvalOutcome {
  EvalReport report;
  std::vector<Prediction> predictions;  // ordered by sample id
};

EvalOutcome run_eval(ResponseSource& source, const EvalSets& sets);

void write_report_json(const std::string& path, const EvalOutcome& outcome,
                       const std::string& config_hash);
void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm);
// human-readable tables (per-class recall + headline metrics, task accuracies)
std::string render_report(const EvalReport& report);

}  // namespace e2
