#include "e2/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>

#include <json.hpp>

using json = nlohmann::ordered_json;

namespace e2 {

void TaskMix::validate() const {
  E2_CHECK(ied >= 0 && epc >= 0 && ess >= 0 && eim >= 0, "task mix: negative proportion");
  double total = ied + epc + ess + eim;
  E2_CHECK(total > 0, "task mix: all proportions zero");
}

namespace {

std::string eeg_ph(int k) { return "<eeg:" + std::to_string(k) + ">"; }

// fill {eeg0..2}, {cmp}, {sup}, {scen0..2}, {scenario}
std::string fill(std::string tpl, const std::map<std::string, std::string>& slots) {
  for (const auto& [key, value] : slots) {
    std::string pat = "{" + key + "}";
    size_t pos;
    while ((pos = tpl.find(pat)) != std::string::npos) tpl.replace(pos, pat.size(), value);
  }
  E2_CHECK(tpl.find('{') == std::string::npos, "template has an unfilled slot: " + tpl);
  return tpl;
}

char letter(int i) { return static_cast<char>('a' + i); }

std::string answer_line(const std::string& key) { return "Answer: " + key; }

QASample finish(QASample s, const SynthOptions& opt) {
  if (!opt.cot) {
    // answer-only format: assistant turns collapse to their final Answer line
    for (auto& t : s.turns) {
      if (t.role != "assistant") continue;
      size_t pos = t.text.rfind("Answer:");
      E2_CHECK(pos != std::string::npos, "internal: assistant turn lacks Answer line");
      t.text = t.text.substr(pos);
    }
  }
  return s;
}

}  // namespace

QASample synthesize_ied(const Window& w, const TemplateBank& bank, Rng& rng,
                        const SynthOptions& opt) {
  QASample s;
  s.task = TaskType::IED;
  s.id = "ied-0";
  s.eeg_refs = {w.window_id};
  s.meta_emotions = {w.emotion};
  s.answer_key = to_string(w.emotion);
  std::string q = fill(rng.pick(bank.questions(TaskType::IED)), {{"eeg0", eeg_ph(0)}});
  std::string desc = rng.pick(bank.descriptions(w.emotion));
  s.turns = {{"user", q}, {"assistant", desc + "\n" + answer_line(s.answer_key)}};
  return finish(std::move(s), opt);
}

QASample synthesize_epc(const Window& w1, const Window& w2, const TemplateBank& bank, Rng& rng,
                        const SynthOptions& opt, std::optional<Emotion> probe) {
  E2_CHECK(w1.window_id != w2.window_id, "EPC: identical window ids");
  E2_CHECK(w1.emotion != w2.emotion, "EPC: windows must carry different emotions");
  Emotion p = probe ? *probe : (rng.uniform() < 0.5 ? w1.emotion : w2.emotion);
  E2_CHECK(p == w1.emotion || p == w2.emotion,
           "EPC: probe emotion matches neither window, key undecidable");
  QASample s;
  s.task = TaskType::EPC;
  s.id = "epc-0";
  s.eeg_refs = {w1.window_id, w2.window_id};
  s.meta_emotions = {w1.emotion, w2.emotion};
  s.answer_key = (p == w1.emotion) ? "yes" : "no";
  std::string q = fill(rng.pick(bank.questions(TaskType::EPC)),
                       {{"eeg0", eeg_ph(0)}, {"eeg1", eeg_ph(1)}, {"cmp", bank.comparative(p)}});
  std::string a = "First segment: " + rng.pick(bank.descriptions(w1.emotion)) +
                  " Second segment: " + rng.pick(bank.descriptions(w2.emotion)) + "\n" +
                  answer_line(s.answer_key);
  s.turns = {{"user", q}, {"assistant", a}};
  return finish(std::move(s), opt);
}

QASample synthesize_ess(const Window& w1, const Window& w2, const Window& w3,
                        const TemplateBank& bank, Rng& rng, const SynthOptions& opt,
                        std::optional<Emotion> probe) {
  const Window* ws[3] = {&w1, &w2, &w3};
  Emotion p;
  if (probe) {
    p = *probe;
  } else {
    // draw among labels carried by exactly one window
    std::vector<Emotion> unique;
    for (int i = 0; i < 3; ++i) {
      int count = 0;
      for (int j = 0; j < 3; ++j)
        if (ws[j]->emotion == ws[i]->emotion) ++count;
      if (count == 1) unique.push_back(ws[i]->emotion);
    }
    E2_CHECK(!unique.empty(), "ESS: no uniquely-held emotion among the three windows");
    p = rng.pick(unique);
  }
  int hit = -1;
  for (int i = 0; i < 3; ++i) {
    if (ws[i]->emotion == p) {
      E2_CHECK(hit < 0, "ESS: probe emotion held by multiple windows");
      hit = i;
    }
  }
  E2_CHECK(hit >= 0, "ESS: probe emotion held by no window");

  QASample s;
  s.task = TaskType::ESS;
  s.id = "ess-0";
  for (int i = 0; i < 3; ++i) {
    s.eeg_refs.push_back(ws[i]->window_id);
    s.meta_emotions.push_back(ws[i]->emotion);
  }
  s.answer_key = std::string(1, letter(hit));
  std::string q = fill(rng.pick(bank.questions(TaskType::ESS)),
                       {{"eeg0", eeg_ph(0)},
                        {"eeg1", eeg_ph(1)},
                        {"eeg2", eeg_ph(2)},
                        {"sup", bank.superlative(p)}});
  std::string a;
  for (int i = 0; i < 3; ++i)
    a += "Segment " + std::string(1, letter(i)) + ": " + rng.pick(bank.descriptions(ws[i]->emotion)) +
         " ";
  a += "\n" + answer_line(s.answer_key);
  s.turns = {{"user", q}, {"assistant", a}};
  return finish(std::move(s), opt);
}

QASample synthesize_eim(const Window& w1, const Window& w2, const Window& w3,
                        const TemplateBank& bank, Rng& rng, const SynthOptions& opt,
                        std::optional<std::array<int, 3>> scenario_to_segment) {
  const Window* ws[3] = {&w1, &w2, &w3};
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      E2_CHECK(ws[i]->emotion != ws[j]->emotion, "EIM: windows must carry three distinct emotions");

  std::array<int, 3> order;
  if (scenario_to_segment) {
    order = *scenario_to_segment;
  } else {
    std::vector<int> idx = {0, 1, 2};
    rng.shuffle(idx);
    std::copy(idx.begin(), idx.end(), order.begin());
  }

  QASample s;
  s.task = TaskType::EIM;
  s.id = "eim-0";
  for (int i = 0; i < 3; ++i) {
    s.eeg_refs.push_back(ws[i]->window_id);
    s.meta_emotions.push_back(ws[i]->emotion);
  }

  std::map<std::string, std::string> slots = {
      {"eeg0", eeg_ph(0)}, {"eeg1", eeg_ph(1)}, {"eeg2", eeg_ph(2)}};
  std::string key, walk;
  for (int k = 0; k < 3; ++k) {
    const Window* target = ws[static_cast<size_t>(order[static_cast<size_t>(k)])];
    slots["scen" + std::to_string(k)] = rng.pick(bank.scenarios(target->emotion));
    if (k) key += ",";
    key += std::to_string(k + 1) + "-" + std::string(1, letter(order[static_cast<size_t>(k)]));
    walk += "Situation " + std::to_string(k + 1) + " fits segment " +
            std::string(1, letter(order[static_cast<size_t>(k)])) + ". " +
            rng.pick(bank.descriptions(target->emotion)) + " ";
  }
  s.answer_key = key;
  std::string q = fill(rng.pick(bank.questions(TaskType::EIM)), slots);
  // display the key with spaces after commas; canonical form has none
  std::string shown = key;
  size_t pos = 0;
  while ((pos = shown.find(',', pos)) != std::string::npos) {
    shown.replace(pos, 1, ", ");
    pos += 2;
  }
  s.turns = {{"user", q}, {"assistant", walk + "\n" + answer_line(shown)}};
  return finish(std::move(s), opt);
}

QASample synthesize_esr(const Window& w1, const Window& w2, const Window& w3,
                        const TemplateBank& bank, Rng& rng, const SynthOptions& opt,
                        std::optional<int> target) {
  const Window* ws[3] = {&w1, &w2, &w3};
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      E2_CHECK(ws[i]->emotion != ws[j]->emotion, "ESR: windows must carry three distinct emotions");
  int t = target ? *target : static_cast<int>(rng.randint(0, 2));
  E2_CHECK(t >= 0 && t < 3, "ESR: target index out of range");

  QASample s;
  s.task = TaskType::ESR;
  s.id = "esr-0";
  for (int i = 0; i < 3; ++i) {
    s.eeg_refs.push_back(ws[i]->window_id);
    s.meta_emotions.push_back(ws[i]->emotion);
  }
  s.answer_key = std::string(1, letter(t));

  std::string q1 = fill(rng.pick(bank.esr_turn1()),
                        {{"eeg0", eeg_ph(0)}, {"eeg1", eeg_ph(1)}, {"eeg2", eeg_ph(2)}});
  std::string a1, labels;
  for (int i = 0; i < 3; ++i) {
    a1 += "Segment " + std::string(1, letter(i)) + ": " +
          rng.pick(bank.descriptions(ws[i]->emotion)) + " ";
    if (i) labels += ", ";
    labels += std::string(1, letter(i)) + "-" + to_string(ws[i]->emotion);
  }
  // turn 1 concludes with the per-segment labels; the selection key comes in turn 2
  a1 += "\n" + answer_line(labels);

  std::string scenario = rng.pick(bank.scenarios(ws[t]->emotion));
  std::string q2 = fill(rng.pick(bank.esr_turn2()), {{"scenario", scenario}});
  std::string a2 = "The situation points to " + to_string(ws[t]->emotion) +
                   ", which matches segment " + std::string(1, letter(t)) + ".\n" +
                   answer_line(s.answer_key);
  s.turns = {{"user", q1}, {"assistant", a1}, {"user", q2}, {"assistant", a2}};
  return finish(std::move(s), opt);
}

// ---------------------------------------------------------------- builders

namespace {

// Groups windows by label and draws least-used emotions first (random
// tiebreak), which keeps per-emotion usage within one count of uniform.
class BalancedPicker {
 public:
  explicit BalancedPicker(const std::vector<Window>& windows) {
    for (const auto& w : windows) by_emotion_[static_cast<size_t>(w.emotion)].push_back(&w);
  }

  std::vector<int> present() const {
    std::vector<int> out;
    for (int e = 0; e < kNumEmotions; ++e)
      if (!by_emotion_[static_cast<size_t>(e)].empty()) out.push_back(e);
    return out;
  }

  void require_all_emotions() const {
    for (int e = 0; e < kNumEmotions; ++e)
      E2_CHECK(!by_emotion_[static_cast<size_t>(e)].empty(),
               "window set has no '" + emotion_names()[static_cast<size_t>(e)] + "' windows");
  }

  std::vector<int> pick_emotions(int k, Rng& rng) {
    std::vector<int> cand = present();
    E2_CHECK(static_cast<int>(cand.size()) >= k,
             "need " + std::to_string(k) + " distinct emotions but only " +
                 std::to_string(cand.size()) + " are present in the window set");
    rng.shuffle(cand);
    std::stable_sort(cand.begin(), cand.end(),
                     [this](int a, int b) { return usage_[static_cast<size_t>(a)] < usage_[static_cast<size_t>(b)]; });
    cand.resize(static_cast<size_t>(k));
    return cand;
  }

  const Window& pick_window(int emotion, Rng& rng) {
    usage_[static_cast<size_t>(emotion)]++;
    return *rng.pick(by_emotion_[static_cast<size_t>(emotion)]);
  }

 private:
  std::array<std::vector<const Window*>, kNumEmotions> by_emotion_;
  std::array<int64_t, kNumEmotions> usage_{};
};

std::vector<int64_t> apportion(const std::vector<double>& weights, int64_t total) {
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::vector<int64_t> counts(weights.size(), 0);
  std::vector<std::pair<double, size_t>> rema;
  int64_t assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    double exact = static_cast<double>(total) * weights[i] / wsum;
    counts[i] = static_cast<int64_t>(exact);
    assigned += counts[i];
    rema.push_back({exact - static_cast<double>(counts[i]), i});
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int64_t i = 0; i < total - assigned; ++i) counts[rema[static_cast<size_t>(i)].second]++;
  return counts;
}

}  // namespace

std::vector<QASample> build_training_set(const std::vector<Window>& windows, int64_t n,
                                         const TaskMix& mix, const TemplateBank& bank,
                                         uint64_t seed, const SynthOptions& opt) {
  mix.validate();
  E2_CHECK(n >= 0, "build_training_set: negative count");
  BalancedPicker picker(windows);
  picker.require_all_emotions();
  Rng rng(derive_seed(seed, "train-set"));

  auto counts = apportion({mix.ied, mix.epc, mix.ess, mix.eim}, n);
  std::vector<TaskType> plan;
  plan.reserve(static_cast<size_t>(n));
  const TaskType kinds[4] = {TaskType::IED, TaskType::EPC, TaskType::ESS, TaskType::EIM};
  for (int t = 0; t < 4; ++t)
    for (int64_t i = 0; i < counts[static_cast<size_t>(t)]; ++i) plan.push_back(kinds[t]);
  rng.shuffle(plan);

  std::vector<QASample> out;
  out.reserve(plan.size());
  for (size_t i = 0; i < plan.size(); ++i) {
    QASample s;
    switch (plan[i]) {
      case TaskType::IED: {
        int e = picker.pick_emotions(1, rng)[0];
        s = synthesize_ied(picker.pick_window(e, rng), bank, rng, opt);
        break;
      }
      case TaskType::EPC: {
        auto es = picker.pick_emotions(2, rng);
        s = synthesize_epc(picker.pick_window(es[0], rng), picker.pick_window(es[1], rng), bank,
                           rng, opt);
        break;
      }
      case TaskType::ESS: {
        auto es = picker.pick_emotions(3, rng);
        s = synthesize_ess(picker.pick_window(es[0], rng), picker.pick_window(es[1], rng),
                           picker.pick_window(es[2], rng), bank, rng, opt);
        break;
      }
      case TaskType::EIM: {
        auto es = picker.pick_emotions(3, rng);
        s = synthesize_eim(picker.pick_window(es[0], rng), picker.pick_window(es[1], rng),
                           picker.pick_window(es[2], rng), bank, rng, opt);
        break;
      }
      case TaskType::ESR:
        fail("ESR can never appear in a training set");
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "train-%06zu", i);
    s.id = buf;
    validate_sample(s);
    out.push_back(std::move(s));
  }
  return out;
}

EvalSets build_eval_set(const std::vector<Window>& test_windows, const TemplateBank& bank,
                        uint64_t seed, const EvalCounts& counts, const SynthOptions& opt,
                        const std::set<std::string>* train_ids) {
  if (train_ids) {
    for (const auto& w : test_windows)
      E2_CHECK(!train_ids->count(w.window_id),
               "eval window '" + w.window_id + "' also appears in the training split");
  }
  EvalSets sets;
  Rng rng(derive_seed(seed, "eval-set"));
  char buf[40];

  for (size_t i = 0; i < test_windows.size(); ++i) {
    QASample s = synthesize_ied(test_windows[i], bank, rng, opt);
    std::snprintf(buf, sizeof(buf), "eval-ied-%06zu", i);
    s.id = buf;
    validate_sample(s);
    sets.ied.push_back(std::move(s));
  }

  BalancedPicker picker(test_windows);
  auto emit_multi = [&](TaskType task, int64_t count, const char* prefix) {
    for (int64_t i = 0; i < count; ++i) {
      QASample s;
      if (task == TaskType::EPC) {
        auto es = picker.pick_emotions(2, rng);
        s = synthesize_epc(picker.pick_window(es[0], rng), picker.pick_window(es[1], rng), bank,
                           rng, opt);
      } else if (task == TaskType::ESS) {
        auto es = picker.pick_emotions(3, rng);
        s = synthesize_ess(picker.pick_window(es[0], rng), picker.pick_window(es[1], rng),
                           picker.pick_window(es[2], rng), bank, rng, opt);
      } else {
        auto es = picker.pick_emotions(3, rng);
        s = synthesize_eim(picker.pick_window(es[0], rng), picker.pick_window(es[1], rng),
                           picker.pick_window(es[2], rng), bank, rng, opt);
      }
      std::snprintf(buf, sizeof(buf), "eval-%s-%06lld", prefix, static_cast<long long>(i));
      s.id = buf;
      validate_sample(s);
      sets.multi.push_back(std::move(s));
    }
  };
  emit_multi(TaskType::EPC, counts.epc, "epc");
  emit_multi(TaskType::ESS, counts.ess, "ess");
  emit_multi(TaskType::EIM, counts.eim, "eim");

  for (int64_t i = 0; i < counts.esr; ++i) {
    auto es = picker.pick_emotions(3, rng);
    QASample s = synthesize_esr(picker.pick_window(es[0], rng), picker.pick_window(es[1], rng),
                                picker.pick_window(es[2], rng), bank, rng, opt);
    std::snprintf(buf, sizeof(buf), "eval-esr-%06lld", static_cast<long long>(i));
    s.id = buf;
    validate_sample(s);
    sets.esr.push_back(std::move(s));
  }
  return sets;
}

// ---------------------------------------------------------------- io

void serialize_samples(const std::string& path, const std::vector<QASample>& samples) {
  std::ofstream os(path, std::ios::trunc);
  E2_CHECK(os.good(), "cannot open '" + path + "' for writing");
  for (const auto& s : samples) {
    json j;
    j["id"] = s.id;
    j["task"] = to_string(s.task);
    j["eeg_refs"] = s.eeg_refs;
    j["turns"] = json::array();
    for (const auto& t : s.turns) j["turns"].push_back({{"role", t.role}, {"text", t.text}});
    j["answer_key"] = s.answer_key;
    json emotions = json::array();
    for (Emotion e : s.meta_emotions) emotions.push_back(to_string(e));
    j["meta"] = {{"emotions", emotions}};
    os << j.dump() << "\n";
  }
  E2_CHECK(os.good(), "write failed for '" + path + "'");
}

std::vector<QASample> deserialize_samples(const std::string& path) {
  std::ifstream is(path);
  E2_CHECK(is.good(), "cannot open '" + path + "'");
  std::vector<QASample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      QASample s;
      s.id = j.at("id").get<std::string>();
      s.task = parse_task(j.at("task").get<std::string>());
      s.eeg_refs = j.at("eeg_refs").get<std::vector<std::string>>();
      for (const auto& t : j.at("turns"))
        s.turns.push_back({t.at("role").get<std::string>(), t.at("text").get<std::string>()});
      s.answer_key = j.at("answer_key").get<std::string>();
      for (const auto& e : j.at("meta").at("emotions"))
        s.meta_emotions.push_back(parse_emotion(e.get<std::string>()));
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      fail("malformed sample at " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- validation

void validate_sample(const QASample& s) {
  size_t users = 0, assistants = 0;
  for (const auto& t : s.turns) {
    if (t.role == "user")
      ++users;
    else if (t.role == "assistant")
      ++assistants;
    else
      fail("sample " + s.id + ": unknown role '" + t.role + "'");
  }
  if (s.task == TaskType::ESR)
    E2_CHECK(users == 2 && assistants == 2,
             "sample " + s.id + ": ESR needs exactly 2 user and 2 assistant turns");
  else
    E2_CHECK(users == 1 && assistants == 1,
             "sample " + s.id + ": needs exactly 1 user and 1 assistant turn");
  E2_CHECK(s.meta_emotions.size() == s.eeg_refs.size(),
           "sample " + s.id + ": meta emotions do not align with eeg_refs");

  std::vector<int> used(s.eeg_refs.size(), 0);
  static const std::regex ph(R"(<eeg:(\d+)>)");
  for (const auto& t : s.turns) {
    if (t.role != "user") continue;
    for (auto it = std::sregex_iterator(t.text.begin(), t.text.end(), ph);
         it != std::sregex_iterator(); ++it) {
      int k = std::stoi((*it)[1].str());
      E2_CHECK(k >= 0 && k < static_cast<int>(s.eeg_refs.size()),
               "sample " + s.id + ": placeholder <eeg:" + std::to_string(k) + "> out of range");
      used[static_cast<size_t>(k)]++;
    }
  }
  for (size_t k = 0; k < used.size(); ++k)
    E2_CHECK(used[k] == 1, "sample " + s.id + ": eeg_ref " + std::to_string(k) +
                               " referenced " + std::to_string(used[k]) + " times");
}

void validate_cot(const QASample& s, bool cot) {
  static const std::regex answer_re(R"(Answer:\s*\S+)");
  for (const auto& t : s.turns) {
    if (t.role != "assistant") continue;
    auto begin = std::sregex_iterator(t.text.begin(), t.text.end(), answer_re);
    auto count = std::distance(begin, std::sregex_iterator());
    E2_CHECK(count == 1, "sample " + s.id + ": assistant turn has " + std::to_string(count) +
                             " Answer lines");
    size_t pos = t.text.find("Answer:");
    if (cot) {
      std::string before = trim(t.text.substr(0, pos));
      E2_CHECK(!before.empty(), "sample " + s.id + ": no description before the Answer line");
    } else {
      E2_CHECK(pos == 0 && t.text.find('\n') == std::string::npos,
               "sample " + s.id + ": answer-only format must be a single Answer line");
    }
  }
}

std::vector<std::string> dataset_vocabulary_extras() {
  std::vector<std::string> out = {
      "First segment:",  "Second segment:", "Segment a:", "Segment b:", "Segment c:",
      "Situation 1 fits segment a.", "The situation points to, which matches segment.",
      "Answer: yes",     "Answer: no",      "Answer: 1-a, 2-b, 3-c",
  };
  for (const auto& name : emotion_names()) out.push_back(name);
  return out;
}

std::array<int64_t, kNumEmotions> emotion_usage(const std::vector<QASample>& samples) {
  std::array<int64_t, kNumEmotions> usage{};
  for (const auto& s : samples)
    for (Emotion e : s.meta_emotions) usage[static_cast<size_t>(e)]++;
  return usage;
}

}  // namespace e2
