#include "e2/template_bank.hpp"

#include <fstream>
#include <sstream>

namespace e2 {

extern const char* kDefaultBankText;  // generated from assets/template_bank.txt

std::string to_string(TaskType t) {
  switch (t) {
    case TaskType::IED: return "IED";
    case TaskType::EPC: return "EPC";
    case TaskType::ESS: return "ESS";
    case TaskType::EIM: return "EIM";
    case TaskType::ESR: return "ESR";
  }
  fail("bad TaskType");
}

TaskType parse_task(const std::string& s) {
  std::string u = lowercase(s);
  if (u == "ied") return TaskType::IED;
  if (u == "epc") return TaskType::EPC;
  if (u == "ess") return TaskType::ESS;
  if (u == "eim") return TaskType::EIM;
  if (u == "esr") return TaskType::ESR;
  fail("unknown task type: '" + s + "'");
}

TemplateBank TemplateBank::builtin() { return from_string(kDefaultBankText); }

TemplateBank TemplateBank::from_file(const std::string& path) {
  std::ifstream is(path);
  E2_CHECK(is.good(), "template bank: cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_string(ss.str());
}

TemplateBank TemplateBank::from_string(const std::string& text) {
  TemplateBank bank;
  int line_no = 0;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    E2_CHECK(eq != std::string::npos,
             "template bank: line " + std::to_string(line_no) + " is not 'key = text'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    E2_CHECK(!key.empty() && !value.empty(),
             "template bank: empty key or text at line " + std::to_string(line_no));
    bank.pools_[key].push_back(value);
  }

  auto pool = [&bank](const std::string& key) -> std::vector<std::string> {
    auto it = bank.pools_.find(key);
    return it == bank.pools_.end() ? std::vector<std::string>{} : it->second;
  };

  bank.questions_.resize(4);
  bank.questions_[0] = pool("ied.question");
  bank.questions_[1] = pool("epc.question");
  bank.questions_[2] = pool("ess.question");
  bank.questions_[3] = pool("eim.question");
  bank.esr_turn1_ = pool("esr.turn1");
  bank.esr_turn2_ = pool("esr.turn2");
  bank.desc_.resize(kNumEmotions);
  bank.scen_.resize(kNumEmotions);
  bank.cmp_.resize(kNumEmotions);
  bank.sup_.resize(kNumEmotions);
  for (int e = 0; e < kNumEmotions; ++e) {
    std::string name = emotion_names()[static_cast<size_t>(e)];
    bank.desc_[static_cast<size_t>(e)] = pool("desc." + name);
    bank.scen_[static_cast<size_t>(e)] = pool("scenario." + name);
    auto cmp = pool("cmp." + name);
    auto sup = pool("sup." + name);
    if (!cmp.empty()) bank.cmp_[static_cast<size_t>(e)] = cmp.front();
    if (!sup.empty()) bank.sup_[static_cast<size_t>(e)] = sup.front();
  }

  // any scenario/desc/cmp/sup key must name a known emotion
  for (const auto& [key, values] : bank.pools_) {
    size_t dot = key.find('.');
    E2_CHECK(dot != std::string::npos, "template bank: malformed key '" + key + "'");
    std::string head = key.substr(0, dot), tail = key.substr(dot + 1);
    if (head == "desc" || head == "scenario" || head == "cmp" || head == "sup")
      parse_emotion(tail);  // throws on unknown tags
    else
      E2_CHECK(head == "ied" || head == "epc" || head == "ess" || head == "eim" || head == "esr",
               "template bank: unknown key '" + key + "'");
  }

  bank.validate();
  return bank;
}

void TemplateBank::validate() const {
  const char* tasks[] = {"IED", "EPC", "ESS", "EIM"};
  for (int t = 0; t < 4; ++t)
    E2_CHECK(questions_[static_cast<size_t>(t)].size() >= 5,
             std::string("template bank: need at least 5 question phrasings for ") + tasks[t]);
  E2_CHECK(esr_turn1_.size() >= 5 && esr_turn2_.size() >= 5,
           "template bank: need at least 5 phrasings for each ESR turn");
  for (int e = 0; e < kNumEmotions; ++e) {
    std::string name = emotion_names()[static_cast<size_t>(e)];
    E2_CHECK(desc_[static_cast<size_t>(e)].size() >= 3,
             "template bank: need at least 3 descriptions for '" + name + "'");
    E2_CHECK(!scen_[static_cast<size_t>(e)].empty(),
             "template bank: need at least 1 scenario for '" + name + "'");
    E2_CHECK(!cmp_[static_cast<size_t>(e)].empty() && !sup_[static_cast<size_t>(e)].empty(),
             "template bank: missing cmp/sup form for '" + name + "'");
  }
}

const std::vector<std::string>& TemplateBank::questions(TaskType t) const {
  int idx = static_cast<int>(t);
  E2_CHECK(idx >= 0 && idx < 4, "questions(): ESR uses esr_turn1/esr_turn2");
  return questions_[static_cast<size_t>(idx)];
}

const std::vector<std::string>& TemplateBank::descriptions(Emotion e) const {
  return desc_[static_cast<size_t>(e)];
}

const std::vector<std::string>& TemplateBank::scenarios(Emotion e) const {
  return scen_[static_cast<size_t>(e)];
}

const std::string& TemplateBank::comparative(Emotion e) const {
  return cmp_[static_cast<size_t>(e)];
}

const std::string& TemplateBank::superlative(Emotion e) const {
  return sup_[static_cast<size_t>(e)];
}

std::vector<std::string> TemplateBank::all_text() const {
  std::vector<std::string> out;
  for (const auto& [key, values] : pools_)
    for (const auto& v : values) out.push_back(v);
  return out;
}

}  // namespace e2
