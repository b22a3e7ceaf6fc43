#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace e2 {

// Thrown for bad configuration (CLI maps it to exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] void fail(const std::string& msg);

#define E2_CHECK(cond, msg) \
  do {                      \
    if (!(cond)) ::e2::fail(msg); \
  } while (0)

// FNV-1a 64-bit. Used for parameter-group checksums, config fingerprints
// and seed derivation, so it must stay stable across platforms.
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(uint64_t v);

// Derive a sub-seed from a master seed and a tag ("stage1", recording id, ...).
uint64_t derive_seed(uint64_t master, const std::string& tag);

// Deterministic RNG. mt19937_64 has a standard-defined sequence; the
// distributions below are implemented here because std::* distributions are
// implementation-defined and would break bit-reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal, Box-Muller
  int64_t randint(int64_t lo, int64_t hi);  // inclusive [lo, hi]
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    E2_CHECK(!v.empty(), "Rng::pick on empty vector");
    return v[static_cast<size_t>(randint(0, static_cast<int64_t>(v.size()) - 1))];
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates with our own index draws.
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(randint(0, i))]);
  }
  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Plain dense row-major matrix for non-differentiable signal work.
struct Matrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int64_t r, int64_t c) : rows(r), cols(c), v(static_cast<size_t>(r * c), 0.0) {}
  double& at(int64_t r, int64_t c) { return v[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * cols + c)]; }
  bool finite() const;
};

// The seven emotion classes, in canonical order. Codes 0..6 are part of the
// window-store wire format and must not be reordered.
enum class Emotion : uint8_t {
  happy = 0,
  surprise = 1,
  neutral = 2,
  disgust = 3,
  fear = 4,
  sad = 5,
  anger = 6,
};
inline constexpr int kNumEmotions = 7;

const std::vector<std::string>& emotion_names();
std::string to_string(Emotion e);
// Canonicalize a label or synonym ("happiness" -> happy). Throws on unknown.
Emotion parse_emotion(const std::string& s);
// Same, but returns false instead of throwing (used by the answer parser).
bool try_parse_emotion(const std::string& s, Emotion& out);

std::string lowercase(std::string s);
std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace e2
