#pragma once

#include <map>
#include <string>
#include <vector>

#include "e2/common.hpp"

namespace e2 {

enum class TaskType { IED, EPC, ESS, EIM, ESR };

std::string to_string(TaskType t);
TaskType parse_task(const std::string& s);

// Phrase pools for question synthesis, keyed by task and emotion. Ships as an
// editable plain-text asset; a compiled-in copy of the same file is the
// fallback when no path is given.
class TemplateBank {
 public:
  static TemplateBank builtin();
  static TemplateBank from_file(const std::string& path);
  static TemplateBank from_string(const std::string& text);

  const std::vector<std::string>& questions(TaskType t) const;       // IED/EPC/ESS/EIM
  const std::vector<std::string>& esr_turn1() const { return esr_turn1_; }
  const std::vector<std::string>& esr_turn2() const { return esr_turn2_; }
  const std::vector<std::string>& descriptions(Emotion e) const;
  const std::vector<std::string>& scenarios(Emotion e) const;
  const std::string& comparative(Emotion e) const;
  const std::string& superlative(Emotion e) const;

  // every phrase in the bank, for vocabulary building
  std::vector<std::string> all_text() const;

 private:
  void validate() const;
  std::map<std::string, std::vector<std::string>> pools_;
  std::vector<std::string> esr_turn1_, esr_turn2_;
  std::vector<std::vector<std::string>> desc_, scen_;
  std::vector<std::string> cmp_, sup_;
  std::vector<std::vector<std::string>> questions_;  // by TaskType index
};

}  // namespace e2
