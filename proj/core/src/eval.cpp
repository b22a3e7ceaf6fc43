#include "e2/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>

#include <httplib.h>
#include <json.hpp>

using json = nlohmann::ordered_json;

namespace e2 {

// ---------------------------------------------------------------- parsing

namespace {

// last case-insensitive occurrence of "answer:"; npos when absent
size_t find_answer_tag(const std::string& low) {
  size_t best = std::string::npos, pos = 0;
  while ((pos = low.find("answer:", pos)) != std::string::npos) {
    best = pos;
    pos += 7;
  }
  return best;
}

std::optional<std::string> canon_letter(const std::vector<std::string>& words) {
  for (const auto& w : words)
    if (w == "a" || w == "b" || w == "c") return w;
  return std::nullopt;
}

std::optional<std::string> canon_yesno(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    if (w == "yes") return std::string("yes");
    if (w == "no") return std::string("no");
  }
  return std::nullopt;
}

std::optional<std::string> canon_emotion(const std::vector<std::string>& words) {
  Emotion e;
  for (const auto& w : words)
    if (try_parse_emotion(w, e)) return to_string(e);
  return std::nullopt;
}

std::optional<std::string> canon_permutation(const std::string& text) {
  static const std::regex pair_re(R"(([123])\s*-\s*([abc]))");
  std::map<char, char> m;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pair_re);
       it != std::sregex_iterator(); ++it) {
    char digit = (*it)[1].str()[0];
    char letter = (*it)[2].str()[0];
    if (m.count(digit) && m[digit] != letter) return std::nullopt;  // contradictory
    m[digit] = letter;
  }
  if (m.size() != 3) return std::nullopt;
  std::set<char> letters;
  for (auto& [d, l] : m) letters.insert(l);
  if (letters.size() != 3) return std::nullopt;  // not a permutation
  std::string out;
  for (char d : {'1', '2', '3'}) {
    if (!out.empty()) out += ",";
    out += d;
    out += '-';
    out += m[d];
  }
  return out;
}

std::string last_sentence(const std::string& low) {
  // final non-empty sentence, splitting on ./!/?
  size_t end = low.find_last_not_of(" \t\r\n");
  if (end == std::string::npos) return "";
  size_t cut = low.find_last_of(".!?", end);
  if (cut != std::string::npos && cut >= end) {
    // the trailing terminator itself; look before it
    size_t prev = low.find_last_of(".!?", cut == 0 ? 0 : cut - 1);
    return low.substr(prev == std::string::npos ? 0 : prev + 1,
                      cut - (prev == std::string::npos ? 0 : prev + 1));
  }
  return low.substr(cut == std::string::npos ? 0 : cut + 1);
}

// exactly one distinct candidate or nothing
template <typename Fn>
std::optional<std::string> unique_in(const std::vector<std::string>& words, Fn&& canon_one) {
  std::set<std::string> found;
  for (const auto& w : words) {
    auto c = canon_one(w);
    if (c) found.insert(*c);
  }
  if (found.size() == 1) return *found.begin();
  return std::nullopt;
}

}  // namespace

std::optional<std::string> parse_answer(const std::string& text, TaskType task) {
  try {
    std::string low = lowercase(text);
    size_t tag = find_answer_tag(low);
    if (tag != std::string::npos) {
      size_t line_end = low.find('\n', tag);
      std::string rest = low.substr(tag + 7, line_end == std::string::npos
                                                  ? std::string::npos
                                                  : line_end - tag - 7);
      auto words = Tokenizer::wordize(rest);
      switch (task) {
        case TaskType::IED: return canon_emotion(words);
        case TaskType::EPC: return canon_yesno(words);
        case TaskType::ESS:
        case TaskType::ESR: return canon_letter(words);
        case TaskType::EIM: return canon_permutation(rest);
      }
      return std::nullopt;
    }
    // fallback: single unambiguous candidate in the final sentence
    auto words = Tokenizer::wordize(last_sentence(low));
    switch (task) {
      case TaskType::IED:
        return unique_in(words, [](const std::string& w) -> std::optional<std::string> {
          Emotion e;
          if (try_parse_emotion(w, e)) return to_string(e);
          return std::nullopt;
        });
      case TaskType::EPC:
        return unique_in(words, [](const std::string& w) -> std::optional<std::string> {
          if (w == "yes" || w == "no") return w;
          return std::nullopt;
        });
      case TaskType::ESS:
      case TaskType::ESR:
        return unique_in(words, [](const std::string& w) -> std::optional<std::string> {
          if (w == "a" || w == "b" || w == "c") return w;
          return std::nullopt;
        });
      case TaskType::EIM: return std::nullopt;
    }
    return std::nullopt;
  } catch (...) {
    return std::nullopt;  // the parser is total by contract
  }
}

// ---------------------------------------------------------------- metrics

int64_t ConfusionMatrix::total() const {
  int64_t n = 0;
  for (int64_t c : counts) n += c;
  return n;
}

ConfusionMatrix confusion_from(const std::vector<Prediction>& preds) {
  ConfusionMatrix cm(kNumEmotions);
  for (const auto& p : preds) {
    int gold = static_cast<int>(parse_emotion(p.gold));
    Emotion pe;
    if (p.parsed && try_parse_emotion(*p.parsed, pe))
      cm.at(gold, static_cast<int>(pe))++;
    else
      cm.at(gold, cm.parse_fail_col())++;
  }
  return cm;
}

std::vector<double> per_class_recall(const ConfusionMatrix& cm) {
  std::vector<double> out;
  for (int g = 0; g < cm.classes; ++g) {
    int64_t row = 0;
    for (int p = 0; p <= cm.classes; ++p) row += cm.at(g, p);
    E2_CHECK(row > 0, "balanced accuracy undefined: class '" +
                          (cm.classes == kNumEmotions ? emotion_names()[static_cast<size_t>(g)]
                                                      : std::to_string(g)) +
                          "' has no gold instances");
    out.push_back(static_cast<double>(cm.at(g, g)) / static_cast<double>(row));
  }
  return out;
}

double balanced_accuracy(const ConfusionMatrix& cm) {
  auto recall = per_class_recall(cm);
  double sum = 0.0;
  for (double r : recall) sum += r;
  return sum / static_cast<double>(recall.size());
}

double cohens_kappa(const ConfusionMatrix& cm) {
  // square (C+1)x(C+1) agreement problem; the overflow column is a prediction
  // category that never occurs in gold
  int64_t total = cm.total();
  E2_CHECK(total > 0, "kappa undefined on an empty confusion matrix");
  int n = cm.classes + 1;
  std::vector<int64_t> rowsum(static_cast<size_t>(n), 0), colsum(static_cast<size_t>(n), 0);
  int64_t diag = 0;
  for (int g = 0; g < cm.classes; ++g)
    for (int p = 0; p < n; ++p) {
      rowsum[static_cast<size_t>(g)] += cm.at(g, p);
      colsum[static_cast<size_t>(p)] += cm.at(g, p);
      if (g == p) diag += cm.at(g, p);
    }
  double po = static_cast<double>(diag) / static_cast<double>(total);
  double pe = 0.0;
  for (int k = 0; k < n; ++k)
    pe += static_cast<double>(rowsum[static_cast<size_t>(k)]) *
          static_cast<double>(colsum[static_cast<size_t>(k)]);
  pe /= static_cast<double>(total) * static_cast<double>(total);
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

double weighted_f1(const ConfusionMatrix& cm) {
  int64_t total = cm.total();
  E2_CHECK(total > 0, "weighted F1 undefined on an empty confusion matrix");
  double out = 0.0;
  for (int c = 0; c < cm.classes; ++c) {
    int64_t support = 0, predicted = 0;
    for (int p = 0; p <= cm.classes; ++p) support += cm.at(c, p);
    for (int g = 0; g < cm.classes; ++g) predicted += cm.at(g, c);
    double tp = static_cast<double>(cm.at(c, c));
    double precision = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
    double recall = support > 0 ? tp / static_cast<double>(support) : 0.0;
    double f1 = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    out += static_cast<double>(support) / static_cast<double>(total) * f1;
  }
  return out;
}

double task_accuracy(const std::vector<Prediction>& preds, TaskType task) {
  int64_t n = 0, hits = 0;
  for (const auto& p : preds) {
    if (p.task != task) continue;
    ++n;
    if (p.parsed && *p.parsed == p.gold) ++hits;
  }
  E2_CHECK(n > 0, "task accuracy over an empty prediction set for " + to_string(task));
  return static_cast<double>(hits) / static_cast<double>(n);
}

// ---------------------------------------------------------------- sources

ModelSource::ModelSource(const ParamStore& params, const ModelConfig& cfg, const Tokenizer& tok,
                         std::function<const Window&(const std::string&)> window_by_id,
                         bool use_lora, int64_t max_tokens)
    : params_(params),
      cfg_(cfg),
      tok_(tok),
      window_by_id_(std::move(window_by_id)),
      use_lora_(use_lora),
      max_tokens_(max_tokens) {}

std::string ModelSource::respond(const QASample& s) {
  std::vector<Tensor> blocks = eeg_blocks_for(s, window_by_id_, params_, cfg_);
  // run the conversation: the model answers every assistant turn itself
  std::vector<Turn> history;
  std::string last;
  for (const auto& turn : s.turns) {
    if (turn.role == "user") {
      history.push_back(turn);
    } else {
      last = generate_reply(history, blocks, params_, cfg_, tok_, max_tokens_, use_lora_);
      history.push_back({"assistant", last});
    }
  }
  return last;
}

FileSource::FileSource(const std::string& path) {
  std::ifstream is(path);
  E2_CHECK(is.good(), "answers file '" + path + "' cannot be opened");
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      answers_[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const std::exception& e) {
      fail("malformed answers file at " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string FileSource::respond(const QASample& s) {
  auto it = answers_.find(s.id);
  return it == answers_.end() ? std::string() : it->second;
}

EndpointSource::EndpointSource(const std::string& url, const std::string& model_name,
                               const std::string& auth_token)
    : url_(url), model_(model_name), token_(auth_token) {}

namespace {

// replace <eeg:k> with a literal stub; endpoints cannot consume embeddings
std::string stub_placeholders(const std::string& text) {
  static const std::regex ph(R"(<eeg:(\d+)>)");
  std::string out;
  std::sregex_iterator it(text.begin(), text.end(), ph), end;
  size_t last = 0;
  for (; it != end; ++it) {
    out += text.substr(last, static_cast<size_t>(it->position()) - last);
    out += "[EEG segment " + std::to_string(std::stoi((*it)[1].str()) + 1) + "]";
    last = static_cast<size_t>(it->position() + it->length());
  }
  out += text.substr(last);
  return out;
}

void split_url(const std::string& url, std::string& base, std::string& path) {
  size_t scheme = url.find("://");
  size_t slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) {
    base = url;
    path = "/";
  } else {
    base = url.substr(0, slash);
    path = url.substr(slash);
  }
}

}  // namespace

std::string EndpointSource::call(const std::vector<Turn>& messages) {
  std::string base, path;
  split_url(url_, base, path);
  httplib::Client client(base);
  client.set_read_timeout(30, 0);
  json body;
  body["model"] = model_;
  body["messages"] = json::array();
  for (const auto& m : messages)
    body["messages"].push_back({{"role", m.role}, {"text", stub_placeholders(m.text)}});
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  std::string last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (res && res->status == 200) {
      try {
        return json::parse(res->body).at("text").get<std::string>();
      } catch (const std::exception& e) {
        last_error = std::string("bad response body: ") + e.what();
        continue;
      }
    }
    last_error = res ? "http status " + std::to_string(res->status) : "connection failed";
  }
  fprintf(stderr, "endpoint failure after 3 attempts (%s); scoring as parse failure\n",
          last_error.c_str());
  return "";
}

std::string EndpointSource::respond(const QASample& s) {
  std::vector<Turn> history;
  std::string last;
  for (const auto& turn : s.turns) {
    if (turn.role == "user") {
      history.push_back(turn);
    } else {
      last = call(history);
      history.push_back({"assistant", last});
    }
  }
  return last;
}

// ---------------------------------------------------------------- driver

EvalOutcome run_eval(ResponseSource& source, const EvalSets& sets) {
  EvalOutcome out;
  auto drive = [&](const std::vector<QASample>& samples) {
    for (const auto& s : samples) {
      Prediction p;
      p.sample_id = s.id;
      p.task = s.task;
      p.gold = s.answer_key;
      p.raw_text = source.respond(s);
      p.parsed = parse_answer(p.raw_text, s.task);
      out.predictions.push_back(std::move(p));
    }
  };
  drive(sets.ied);
  drive(sets.multi);
  drive(sets.esr);
  std::sort(out.predictions.begin(), out.predictions.end(),
            [](const Prediction& a, const Prediction& b) { return a.sample_id < b.sample_id; });

  EvalReport& r = out.report;
  std::vector<Prediction> ied;
  int64_t fails = 0;
  std::set<TaskType> present;
  for (const auto& p : out.predictions) {
    if (p.task == TaskType::IED) ied.push_back(p);
    if (!p.parsed) ++fails;
    present.insert(p.task);
  }
  r.n_ied = static_cast<int64_t>(sets.ied.size());
  r.n_multi = static_cast<int64_t>(sets.multi.size());
  r.n_esr = static_cast<int64_t>(sets.esr.size());
  if (!ied.empty()) {
    r.confusion = confusion_from(ied);
    r.recall = per_class_recall(r.confusion);
    r.balanced_accuracy = balanced_accuracy(r.confusion);
    r.kappa = cohens_kappa(r.confusion);
    r.weighted_f1 = weighted_f1(r.confusion);
  }
  for (TaskType t : {TaskType::EPC, TaskType::ESS, TaskType::EIM, TaskType::ESR})
    if (present.count(t)) r.task_accuracy[to_string(t)] = task_accuracy(out.predictions, t);
  r.parse_failure_rate = out.predictions.empty()
                             ? 0.0
                             : static_cast<double>(fails) /
                                   static_cast<double>(out.predictions.size());
  return out;
}

void write_report_json(const std::string& path, const EvalOutcome& outcome,
                       const std::string& config_hash) {
  const EvalReport& r = outcome.report;
  json j;
  j["config_hash"] = config_hash;
  j["counts"] = {{"ied", r.n_ied}, {"multi", r.n_multi}, {"esr", r.n_esr}};
  j["balanced_accuracy"] = r.balanced_accuracy;
  j["cohens_kappa"] = r.kappa;
  j["weighted_f1"] = r.weighted_f1;
  json recall;
  for (size_t i = 0; i < r.recall.size(); ++i) recall[emotion_names()[i]] = r.recall[i];
  j["per_class_recall"] = recall;
  j["task_accuracy"] = r.task_accuracy;
  j["parse_failure_rate"] = r.parse_failure_rate;
  std::ofstream os(path, std::ios::trunc);
  E2_CHECK(os.good(), "cannot write report '" + path + "'");
  os << j.dump(2) << "\n";
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm) {
  std::ofstream os(path, std::ios::trunc);
  E2_CHECK(os.good(), "cannot write confusion matrix '" + path + "'");
  os << "gold\\pred";
  for (int p = 0; p < cm.classes; ++p) os << "," << emotion_names()[static_cast<size_t>(p)];
  os << ",parse_fail\n";
  for (int g = 0; g < cm.classes; ++g) {
    os << emotion_names()[static_cast<size_t>(g)];
    for (int p = 0; p <= cm.classes; ++p) os << "," << cm.at(g, p);
    os << "\n";
  }
}

std::string render_report(const EvalReport& r) {
  char buf[128];
  std::string out;
  if (r.n_ied > 0) {
    out += "per-class recall (%):\n";
    for (size_t i = 0; i < r.recall.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "  %-9s %6.2f\n", emotion_names()[i].c_str(),
                    100.0 * r.recall[i]);
      out += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "balanced accuracy %6.2f | cohen's kappa %6.2f | weighted f1 %6.2f\n",
                  100.0 * r.balanced_accuracy, 100.0 * r.kappa, 100.0 * r.weighted_f1);
    out += buf;
  }
  if (!r.task_accuracy.empty()) {
    out += "task accuracy (%):";
    for (const auto& [task, acc] : r.task_accuracy) {
      std::snprintf(buf, sizeof(buf), "  %s %.2f", task.c_str(), 100.0 * acc);
      out += buf;
    }
    out += "\n";
  }
  std::snprintf(buf, sizeof(buf), "parse failures: %.2f%%\n", 100.0 * r.parse_failure_rate);
  out += buf;
  return out;
}

}  // namespace e2
