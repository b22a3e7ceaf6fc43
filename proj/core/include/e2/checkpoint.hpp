#pragma once

#include <map>
#include <string>
#include <vector>

#include "e2/tensor.hpp"

namespace e2 {

// Named parameter tensors. Stage plans freeze/train whole prefix groups
// ("encoder.", "projector.", "lm.", "classifier.", "lora."), so the store is
// ordered by name to keep checkpoints and checksums deterministic.
class ParamStore {
 public:
  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  int64_t numel_with_prefix(const std::string& prefix) const;
  // FNV-1a over the raw f64 bytes of every tensor in the group, in name order.
  uint64_t group_checksum(const std::string& prefix) const;
  void zero_grads();

  std::map<std::string, Tensor>& map() { return params_; }
  const std::map<std::string, Tensor>& map() const { return params_; }

 private:
  std::map<std::string, Tensor> params_;
};

// Named-tensor archive. Layout, little-endian:
//   magic "E2CK", u16 version=1, u32 count,
//   per tensor: u16 name length + UTF-8 name, u32 rank, u32 dims..., f64 data.
void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

void save_checkpoint(const std::string& path, const ParamStore& store);
void load_into(ParamStore& store, const std::string& path);

}  // namespace e2
