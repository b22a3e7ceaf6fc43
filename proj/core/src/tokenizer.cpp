#include "e2/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace e2 {

namespace {
const char* kSpecialNames[] = {"<pad>", "<unk>", "<bos>", "<eos>", "<eeg_start>", "<eeg_end>"};

bool word_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }
}  // namespace

std::vector<std::string> Tokenizer::wordize(const std::string& text) {
  std::string low = lowercase(text);
  std::vector<std::string> out;
  size_t i = 0;
  while (i < low.size()) {
    char c = low[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if (word_char(c)) {
      size_t j = i;
      while (j < low.size() && word_char(low[j])) ++j;
      out.push_back(low.substr(i, j - i));
      i = j;
    } else {
      // template slots are stripped, never tokenized
      if (c == '{') {
        size_t j = low.find('}', i);
        if (j != std::string::npos) {
          i = j + 1;
          continue;
        }
      }
      out.push_back(std::string(1, c));
      ++i;
    }
  }
  return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus) {
  std::set<std::string> vocab;
  for (const auto& text : corpus)
    for (auto& w : wordize(text)) vocab.insert(w);

  Tokenizer tok;
  for (int i = 0; i < kNumSpecials; ++i) tok.words_.push_back(kSpecialNames[i]);
  for (const auto& w : vocab) tok.words_.push_back(w);
  for (size_t i = 0; i < tok.words_.size(); ++i) tok.lookup_[tok.words_[i]] = static_cast<int64_t>(i);
  return tok;
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  E2_CHECK(os.good(), "tokenizer: cannot write '" + path + "'");
  for (size_t i = kNumSpecials; i < words_.size(); ++i) os << words_[i] << "\n";
  E2_CHECK(os.good(), "tokenizer: write failed for '" + path + "'");
}

Tokenizer Tokenizer::from_file(const std::string& path) {
  std::ifstream is(path);
  E2_CHECK(is.good(), "tokenizer: cannot open '" + path + "'");
  Tokenizer tok;
  for (int i = 0; i < kNumSpecials; ++i) tok.words_.push_back(kSpecialNames[i]);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) tok.words_.push_back(line);
  }
  for (size_t i = 0; i < tok.words_.size(); ++i) tok.lookup_[tok.words_[i]] = static_cast<int64_t>(i);
  return tok;
}

std::vector<int64_t> Tokenizer::encode(const std::string& text) const {
  std::vector<int64_t> out;
  for (auto& w : wordize(text)) out.push_back(id(w));
  return out;
}

int64_t Tokenizer::id(const std::string& word) const {
  auto it = lookup_.find(word);
  return it == lookup_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::word(int64_t id) const {
  E2_CHECK(id >= 0 && id < vocab_size(), "tokenizer: id " + std::to_string(id) + " out of range");
  return words_[static_cast<size_t>(id)];
}

std::string Tokenizer::decode(const std::vector<int64_t>& ids) const {
  static const std::string no_space_before = ".,:;?!)'-";
  static const std::string no_space_after = "('-";
  std::string out;
  bool suppress_space = true;
  for (int64_t id : ids) {
    if (id < kNumSpecials) continue;
    const std::string& w = word(id);
    bool attach = w.size() == 1 && no_space_before.find(w[0]) != std::string::npos;
    if (!out.empty() && !attach && !suppress_space) out += ' ';
    out += w;
    suppress_space = w.size() == 1 && no_space_after.find(w[0]) != std::string::npos;
  }
  return out;
}

}  // namespace e2
