#include "e2/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace e2 {

void fail(const std::string& msg) { throw std::runtime_error(msg); }

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s, uint64_t h) { return fnv1a64(s.data(), s.size(), h); }

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t derive_seed(uint64_t master, const std::string& tag) {
  uint64_t h = fnv1a64(&master, sizeof(master));
  return fnv1a64(tag, h);
}

double Rng::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

int64_t Rng::randint(int64_t lo, int64_t hi) {
  E2_CHECK(lo <= hi, "Rng::randint: empty range");
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  // rejection sampling to avoid modulo bias
  uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return lo + static_cast<int64_t>(x % span);
}

bool Matrix::finite() const {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

const std::vector<std::string>& emotion_names() {
  static const std::vector<std::string> names = {"happy",   "surprise", "neutral", "disgust",
                                                 "fear",    "sad",      "anger"};
  return names;
}

std::string to_string(Emotion e) { return emotion_names()[static_cast<size_t>(e)]; }

bool try_parse_emotion(const std::string& s, Emotion& out) {
  static const std::map<std::string, Emotion> table = {
      {"happy", Emotion::happy},       {"happiness", Emotion::happy},
      {"joy", Emotion::happy},         {"surprise", Emotion::surprise},
      {"surprised", Emotion::surprise}, {"neutral", Emotion::neutral},
      {"neutrality", Emotion::neutral}, {"disgust", Emotion::disgust},
      {"disgusted", Emotion::disgust}, {"fear", Emotion::fear},
      {"fearful", Emotion::fear},      {"afraid", Emotion::fear},
      {"sad", Emotion::sad},           {"sadness", Emotion::sad},
      {"depression", Emotion::sad},    {"anger", Emotion::anger},
      {"angry", Emotion::anger},
  };
  auto it = table.find(lowercase(s));
  if (it == table.end()) return false;
  out = it->second;
  return true;
}

Emotion parse_emotion(const std::string& s) {
  Emotion e;
  E2_CHECK(try_parse_emotion(s, e), "unknown emotion label: '" + s + "'");
  return e;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace e2
