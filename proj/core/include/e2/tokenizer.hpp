#pragma once

#include <map>
#include <string>
#include <vector>

#include "e2/common.hpp"

namespace e2 {

// Word-level tokenizer over a closed text domain. Text is lowercased and
// split into [a-z0-9]+ runs; any other non-space character is its own token.
// The vocabulary is frozen at build time; unknown words map to <unk>.
class Tokenizer {
 public:
  // fixed special ids, part of the checkpoint/wire contract
  static constexpr int64_t kPad = 0;
  static constexpr int64_t kUnk = 1;
  static constexpr int64_t kBos = 2;
  static constexpr int64_t kEos = 3;
  static constexpr int64_t kEegStart = 4;
  static constexpr int64_t kEegEnd = 5;
  static constexpr int64_t kNumSpecials = 6;

  static Tokenizer build(const std::vector<std::string>& corpus);
  static Tokenizer from_file(const std::string& path);
  void save(const std::string& path) const;

  static std::vector<std::string> wordize(const std::string& text);

  std::vector<int64_t> encode(const std::string& text) const;
  // join words, reattaching punctuation; special ids are skipped
  std::string decode(const std::vector<int64_t>& ids) const;
  int64_t id(const std::string& word) const;
  const std::string& word(int64_t id) const;
  int64_t vocab_size() const { return static_cast<int64_t>(words_.size()); }

 private:
  std::vector<std::string> words_;          // id -> word (ids 0..5 are specials)
  std::map<std::string, int64_t> lookup_;  // word -> id
};

}  // namespace e2
