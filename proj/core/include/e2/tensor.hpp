#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "e2/common.hpp"

namespace e2 {

// Dense 64-bit tensor with reverse-mode autodiff.
//
// A Tensor is a shared handle to a graph node. Ops build the graph eagerly;
// backward(loss) runs one reverse topological sweep and accumulates gradients
// additively into every requires_grad leaf. Values are immutable once an op
// has consumed them. Everything is double precision: at the scales this
// project runs, tight gradient checks matter more than speed.

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor();  // null handle

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(const Shape& shape, Rng& rng, double stdev, bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t numel() const;
  int64_t rank() const;
  // rank-1 tensors count as a single row
  int64_t rows() const;
  int64_t cols() const;

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();  // leaves only; invalid once consumed by an op
  double item() const;                  // numel()==1
  double at(int64_t r, int64_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool rg);  // leaves only (stage freezing)
  // gradient buffer, allocated on demand (zeros)
  const std::vector<double>& grad() const;
  void zero_grad();

  // copy of the values as a fresh leaf
  Tensor detached(bool requires_grad = false) const;
  Matrix to_matrix() const;

  detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
  friend Tensor make_op(Shape shape, std::vector<Tensor> parents,
                        std::vector<double> value,
                        std::function<void(detail::Node&)> backward);
};

// ---- ops ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);           // same shape
Tensor add_rowwise(const Tensor& a, const Tensor& bias);  // [m,n] + [n]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& a);  // tanh approximation (see gelu_scalar)
Tensor softmax_lastdim(const Tensor& a);
Tensor layernorm_lastdim(const Tensor& a, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor slice_rows(const Tensor& a, int64_t r0, int64_t r1);
Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
// Row gather with repeat-safe scatter-add backward. embedding_lookup is the
// same op under its domain name.
Tensor take_rows(const Tensor& a, const std::vector<int64_t>& ids);
inline Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids) {
  return take_rows(table, ids);
}
Tensor mean_all(const Tensor& a);   // -> shape {1}
Tensor mean_rows(const Tensor& a);  // [m,n] -> {n}
Tensor sum_all(const Tensor& a);    // -> shape {1}
// mean over batch of -log softmax(logits)[target]
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets);

// the exact forward formula used by gelu(), exposed so tests can share it
double gelu_scalar(double x);

// Reverse sweep from a scalar loss. Grads accumulate (+=) into leaves.
void backward(const Tensor& loss);

// Compare analytic gradients of f at x against central differences.
// Subsamples coordinates when x is large (at least min_coords, seeded).
// Returns max |analytic - numeric| / max(|analytic|, |numeric|, 1).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-5, int64_t min_coords = 200, uint64_t seed = 0);

}  // namespace e2
