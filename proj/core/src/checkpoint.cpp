#include "e2/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace e2 {

void ParamStore::add(const std::string& name, Tensor t) {
  E2_CHECK(!params_.count(name), "ParamStore: duplicate parameter '" + name + "'");
  params_.emplace(name, std::move(t));
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) > 0; }

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  E2_CHECK(it != params_.end(), "ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  E2_CHECK(it != params_.end(), "ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : params_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

int64_t ParamStore::numel_with_prefix(const std::string& prefix) const {
  int64_t n = 0;
  for (const auto& [k, v] : params_)
    if (k.rfind(prefix, 0) == 0) n += v.numel();
  return n;
}

uint64_t ParamStore::group_checksum(const std::string& prefix) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : params_) {
    if (k.rfind(prefix, 0) != 0) continue;
    h = fnv1a64(k, h);
    h = fnv1a64(v.data().data(), v.data().size() * sizeof(double), h);
  }
  return h;
}

void ParamStore::zero_grads() {
  for (auto& [k, v] : params_) v.zero_grad();
}

// ---- binary io helpers (explicit little-endian) ----

namespace {

void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  uint64_t u = 0;
  std::memcpy(&u, &v, sizeof(T));
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  put_bytes(os, buf, sizeof(T));
}

void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_le<uint64_t>(os, u);
}

void get_bytes(std::istream& is, void* p, size_t n, const std::string& what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  E2_CHECK(static_cast<size_t>(is.gcount()) == n, "checkpoint: truncated while reading " + what);
}

template <typename T>
T get_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  get_bytes(is, buf, sizeof(T), what);
  uint64_t u = 0;
  for (size_t i = 0; i < sizeof(T); ++i) u |= static_cast<uint64_t>(buf[i]) << (8 * i);
  T v;
  std::memcpy(&v, &u, sizeof(T));
  return v;
}

double get_f64(std::istream& is, const std::string& what) {
  uint64_t u = get_le<uint64_t>(is, what);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

constexpr char kMagic[4] = {'E', '2', 'C', 'K'};
constexpr uint16_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  E2_CHECK(os.good(), "checkpoint: cannot open '" + path + "' for writing");
  put_bytes(os, kMagic, 4);
  put_le<uint16_t>(os, kVersion);
  put_le<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    E2_CHECK(name.size() < 65536, "checkpoint: name too long");
    put_le<uint16_t>(os, static_cast<uint16_t>(name.size()));
    put_bytes(os, name.data(), name.size());
    const Shape& s = t.shape();
    put_le<uint32_t>(os, static_cast<uint32_t>(s.size()));
    for (int64_t d : s) put_le<uint32_t>(os, static_cast<uint32_t>(d));
    for (double v : t.data()) put_f64(os, v);
  }
  E2_CHECK(os.good(), "checkpoint: write failed for '" + path + "'");
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  E2_CHECK(is.good(), "checkpoint: cannot open '" + path + "'");
  char magic[4];
  get_bytes(is, magic, 4, "magic");
  E2_CHECK(std::memcmp(magic, kMagic, 4) == 0, "checkpoint: bad magic in '" + path + "'");
  uint16_t version = get_le<uint16_t>(is, "version");
  E2_CHECK(version == kVersion,
           "checkpoint: unsupported version " + std::to_string(version) + " in '" + path + "'");
  uint32_t count = get_le<uint32_t>(is, "count");
  std::map<std::string, Tensor> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = get_le<uint16_t>(is, "name length");
    std::string name(name_len, '\0');
    get_bytes(is, name.data(), name_len, "name");
    uint32_t rank = get_le<uint32_t>(is, "rank");
    Shape shape(rank);
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = get_le<uint32_t>(is, "dim");
      numel *= shape[d];
    }
    std::vector<double> data(static_cast<size_t>(numel));
    for (auto& v : data) v = get_f64(is, "tensor '" + name + "'");
    out.emplace(name, Tensor::from_data(shape, std::move(data)));
  }
  return out;
}

void save_checkpoint(const std::string& path, const ParamStore& store) {
  save_checkpoint(path, store.map());
}

void load_into(ParamStore& store, const std::string& path) {
  auto loaded = load_checkpoint(path);
  for (auto& [name, t] : loaded) {
    E2_CHECK(store.has(name), "checkpoint: '" + path + "' has unknown parameter '" + name + "'");
    Tensor& dst = store.at(name);
    E2_CHECK(dst.shape() == t.shape(), "checkpoint: shape mismatch for '" + name + "': store " +
                                           shape_str(dst.shape()) + " vs file " +
                                           shape_str(t.shape()));
    dst.mutable_data() = t.data();
  }
}

}  // namespace e2
