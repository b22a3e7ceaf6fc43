#include "e2/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace e2 {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on demand
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, += into parents

  int64_t numel() const {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};
}  // namespace detail

using detail::Node;

static std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool rg) {
  auto n = std::make_shared<Node>();
  int64_t numel = 1;
  for (auto d : shape) {
    E2_CHECK(d >= 0, "negative dimension in shape " + shape_str(shape));
    numel *= d;
  }
  E2_CHECK(numel == static_cast<int64_t>(data.size()),
           "data size " + std::to_string(data.size()) + " does not match shape " +
               shape_str(shape));
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = rg;
  return n;
}

Tensor::Tensor() = default;

Tensor Tensor::zeros(const Shape& shape, bool rg) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  return Tensor(make_leaf(shape, std::vector<double>(static_cast<size_t>(n), 0.0), rg));
}

Tensor Tensor::full(const Shape& shape, double value, bool rg) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  return Tensor(make_leaf(shape, std::vector<double>(static_cast<size_t>(n), value), rg));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool rg) {
  return Tensor(make_leaf(shape, std::move(data), rg));
}

Tensor Tensor::scalar(double value, bool rg) { return from_data({1}, {value}, rg); }

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stdev, bool rg) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> data(static_cast<size_t>(n));
  for (auto& x : data) x = rng.normal() * stdev;
  return Tensor(make_leaf(shape, std::move(data), rg));
}

Tensor Tensor::from_matrix(const Matrix& m, bool rg) { return from_data({m.rows, m.cols}, m.v, rg); }

const Shape& Tensor::shape() const {
  E2_CHECK(node_, "use of null Tensor");
  return node_->shape;
}

int64_t Tensor::numel() const { return node_->numel(); }
int64_t Tensor::rank() const { return static_cast<int64_t>(shape().size()); }

int64_t Tensor::rows() const {
  const Shape& s = shape();
  E2_CHECK(s.size() <= 2, "rows() on tensor of shape " + shape_str(s));
  return s.size() == 2 ? s[0] : 1;
}

int64_t Tensor::cols() const {
  const Shape& s = shape();
  E2_CHECK(!s.empty() && s.size() <= 2, "cols() on tensor of shape " + shape_str(s));
  return s.back();
}

const std::vector<double>& Tensor::data() const {
  E2_CHECK(node_, "use of null Tensor");
  return node_->value;
}

std::vector<double>& Tensor::mutable_data() {
  E2_CHECK(node_, "use of null Tensor");
  return node_->value;
}

double Tensor::item() const {
  E2_CHECK(numel() == 1, "item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(int64_t r, int64_t c) const {
  return node_->value[static_cast<size_t>(r * cols() + c)];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  E2_CHECK(node_ && !node_->backward_fn, "set_requires_grad: not a leaf tensor");
  node_->requires_grad = rg;
}

const std::vector<double>& Tensor::grad() const {
  E2_CHECK(node_, "use of null Tensor");
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detached(bool rg) const { return from_data(shape(), data(), rg); }

Matrix Tensor::to_matrix() const {
  Matrix m(rows(), cols());
  m.v = data();
  return m;
}

// Builds an op node. Parents are always held strongly so intermediate values
// stay alive as long as any downstream handle does.
Tensor make_op(Shape shape, std::vector<Tensor> parents, std::vector<double> value,
               std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (auto& p : parents) {
    E2_CHECK(p.defined(), "op input is a null Tensor");
    n->parents.push_back(p.node_);
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) n->backward_fn = std::move(backward);
  return Tensor(std::move(n));
}

static void check_rank2(const Tensor& t, const char* opname) {
  E2_CHECK(t.rank() == 2, std::string(opname) + ": expected rank-2 tensor, got shape " +
                              shape_str(t.shape()));
}

// ---------------------------------------------------------------- matmul

// C[m,n] += A[m,k] * B[k,n]; ikj order keeps the inner loop contiguous.
static void mm_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += A[m,n] * B^T where B is [k,n]
static void mm_acc_bt(const double* a, const double* b, double* c, int64_t m, int64_t n,
                      int64_t k) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    double* crow = c + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double s = 0.0;
      for (int64_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      crow[p] += s;
    }
  }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n]
static void mm_acc_at(const double* a, const double* b, double* c, int64_t m, int64_t k,
                      int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  E2_CHECK(a.cols() == b.rows(), "matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                     " vs " + shape_str(b.shape()));
  int64_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  mm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  Node* an = a.node();
  Node* bn = b.node();
  return make_op({m, n}, {a, b}, std::move(out), [an, bn, m, k, n](Node& self) {
    if (an->requires_grad)
      mm_acc_bt(self.grad.data(), bn->value.data(), an->ensure_grad().data(), m, n, k);
    if (bn->requires_grad)
      mm_acc_at(an->value.data(), self.grad.data(), bn->ensure_grad().data(), m, k, n);
  });
}

// ---------------------------------------------------------------- pointwise

Tensor add(const Tensor& a, const Tensor& b) {
  E2_CHECK(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  Node* an = a.node();
  Node* bn = b.node();
  return make_op(a.shape(), {a, b}, std::move(out), [an, bn](Node& self) {
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
  check_rank2(a, "add_rowwise");
  E2_CHECK(bias.rank() == 1 || bias.rows() == 1,
           "add_rowwise: bias must be a vector, got shape " + shape_str(bias.shape()));
  E2_CHECK(bias.numel() == a.cols(), "add_rowwise: shape mismatch " + shape_str(a.shape()) +
                                         " vs " + shape_str(bias.shape()));
  int64_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.data());
  const auto& bd = bias.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(i * n + j)] += bd[static_cast<size_t>(j)];
  Node* an = a.node();
  Node* bn = bias.node();
  return make_op(a.shape(), {a, bias}, std::move(out), [an, bn, m, n](Node& self) {
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
          g[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i * n + j)];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  E2_CHECK(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  Node* an = a.node();
  Node* bn = b.node();
  return make_op(a.shape(), {a, b}, std::move(out), [an, bn](Node& self) {
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (auto& x : out) x *= c;
  Node* an = a.node();
  return make_op(a.shape(), {a}, std::move(out), [an, c](Node& self) {
    auto& g = an->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

double gelu_scalar(double x) {
  const double k = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.data().size());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = gelu_scalar(ad[i]);
  Node* an = a.node();
  return make_op(a.shape(), {a}, std::move(out), [an](Node& self) {
    const double k = 0.7978845608028654;
    auto& g = an->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      double x = an->value[i];
      double u = k * (x + 0.044715 * x * x * x);
      double t = std::tanh(u);
      double du = k * (1.0 + 3.0 * 0.044715 * x * x);
      double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      g[i] += d * self.grad[i];
    }
  });
}

Tensor softmax_lastdim(const Tensor& a) {
  E2_CHECK(a.rank() >= 1, "softmax_lastdim: scalar input");
  int64_t n = a.shape().back();
  int64_t m = a.numel() / n;
  std::vector<double> out(a.data().size());
  const auto& ad = a.data();
  for (int64_t i = 0; i < m; ++i) {
    const double* row = ad.data() + i * n;
    double* orow = out.data() + i * n;
    double mx = row[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int64_t j = 0; j < n; ++j) orow[j] /= sum;
  }
  Node* an = a.node();
  return make_op(a.shape(), {a}, std::move(out), [an, m, n](Node& self) {
    auto& g = an->ensure_grad();
    for (int64_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* dy = self.grad.data() + i * n;
      double dot = 0.0;
      for (int64_t j = 0; j < n; ++j) dot += y[j] * dy[j];
      double* gr = g.data() + i * n;
      for (int64_t j = 0; j < n; ++j) gr[j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor layernorm_lastdim(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  int64_t n = a.shape().back();
  int64_t m = a.numel() / n;
  E2_CHECK(gain.numel() == n && bias.numel() == n,
           "layernorm_lastdim: affine shape mismatch " + shape_str(a.shape()) + " vs " +
               shape_str(gain.shape()));
  std::vector<double> out(a.data().size());
  std::vector<double> inv_std(static_cast<size_t>(m));
  std::vector<double> xhat(a.data().size());
  const auto& ad = a.data();
  const auto& gd = gain.data();
  const auto& bd = bias.data();
  for (int64_t i = 0; i < m; ++i) {
    const double* row = ad.data() + i * n;
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int64_t j = 0; j < n; ++j) {
      double xh = (row[j] - mean) * is;
      xhat[static_cast<size_t>(i * n + j)] = xh;
      out[static_cast<size_t>(i * n + j)] = gd[static_cast<size_t>(j)] * xh + bd[static_cast<size_t>(j)];
    }
  }
  Node* an = a.node();
  Node* gn = gain.node();
  Node* bn = bias.node();
  auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
  auto is = std::make_shared<std::vector<double>>(std::move(inv_std));
  return make_op(a.shape(), {a, gain, bias}, std::move(out), [an, gn, bn, xh, is, m, n](Node& self) {
    for (int64_t i = 0; i < m; ++i) {
      const double* dy = self.grad.data() + i * n;
      const double* xhr = xh->data() + i * n;
      double isv = (*is)[static_cast<size_t>(i)];
      if (gn->requires_grad) {
        auto& gg = gn->ensure_grad();
        for (int64_t j = 0; j < n; ++j) gg[static_cast<size_t>(j)] += dy[j] * xhr[j];
      }
      if (bn->requires_grad) {
        auto& bg = bn->ensure_grad();
        for (int64_t j = 0; j < n; ++j) bg[static_cast<size_t>(j)] += dy[j];
      }
      if (an->requires_grad) {
        auto& ag = an->ensure_grad();
        double* dx = ag.data() + i * n;
        // dxhat = dy * gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_std
        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
        for (int64_t j = 0; j < n; ++j) {
          double dxh = dy[j] * gn->value[static_cast<size_t>(j)];
          mean_dxh += dxh;
          mean_dxh_xh += dxh * xhr[j];
        }
        mean_dxh /= static_cast<double>(n);
        mean_dxh_xh /= static_cast<double>(n);
        for (int64_t j = 0; j < n; ++j) {
          double dxh = dy[j] * gn->value[static_cast<size_t>(j)];
          dx[j] += (dxh - mean_dxh - xhr[j] * mean_dxh_xh) * isv;
        }
      }
    }
  });
}

// ---------------------------------------------------------------- movement

Tensor transpose(const Tensor& a) {
  check_rank2(a, "transpose");
  int64_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.data().size());
  const auto& ad = a.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      out[static_cast<size_t>(j * m + i)] = ad[static_cast<size_t>(i * n + j)];
  Node* an = a.node();
  return make_op({n, m}, {a}, std::move(out), [an, m, n](Node& self) {
    auto& g = an->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        g[static_cast<size_t>(i * n + j)] += self.grad[static_cast<size_t>(j * m + i)];
  });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  E2_CHECK(n == a.numel(), "reshape: numel mismatch " + shape_str(a.shape()) + " -> " +
                               shape_str(shape));
  Node* an = a.node();
  return make_op(shape, {a}, a.data(), [an](Node& self) {
    auto& g = an->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice_rows(const Tensor& a, int64_t r0, int64_t r1) {
  check_rank2(a, "slice_rows");
  E2_CHECK(0 <= r0 && r0 <= r1 && r1 <= a.rows(),
           "slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
               ") out of bounds for shape " + shape_str(a.shape()));
  int64_t n = a.cols();
  std::vector<double> out(a.data().begin() + r0 * n, a.data().begin() + r1 * n);
  Node* an = a.node();
  return make_op({r1 - r0, n}, {a}, std::move(out), [an, r0, n](Node& self) {
    auto& g = an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      g[static_cast<size_t>(r0 * n) + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1) {
  check_rank2(a, "slice_cols");
  E2_CHECK(0 <= c0 && c0 <= c1 && c1 <= a.cols(),
           "slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
               ") out of bounds for shape " + shape_str(a.shape()));
  int64_t m = a.rows(), n = a.cols(), w = c1 - c0;
  std::vector<double> out(static_cast<size_t>(m * w));
  const auto& ad = a.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < w; ++j)
      out[static_cast<size_t>(i * w + j)] = ad[static_cast<size_t>(i * n + c0 + j)];
  Node* an = a.node();
  return make_op({m, w}, {a}, std::move(out), [an, m, n, w, c0](Node& self) {
    auto& g = an->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < w; ++j)
        g[static_cast<size_t>(i * n + c0 + j)] += self.grad[static_cast<size_t>(i * w + j)];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  E2_CHECK(!parts.empty(), "concat_rows: no inputs");
  int64_t n = parts[0].cols();
  int64_t m = 0;
  for (const auto& p : parts) {
    check_rank2(p, "concat_rows");
    E2_CHECK(p.cols() == n, "concat_rows: column mismatch " + shape_str(p.shape()) +
                                " vs expected cols " + std::to_string(n));
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(m * n));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Node*> nodes;
  std::vector<int64_t> row_of;
  int64_t r = 0;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    row_of.push_back(r);
    r += p.rows();
  }
  return make_op({m, n}, parts, std::move(out), [nodes, row_of, n](Node& self) {
    for (size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k]->requires_grad) continue;
      auto& g = nodes[k]->ensure_grad();
      size_t off = static_cast<size_t>(row_of[k] * n);
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  E2_CHECK(!parts.empty(), "concat_cols: no inputs");
  int64_t m = parts[0].rows();
  int64_t n = 0;
  for (const auto& p : parts) {
    check_rank2(p, "concat_cols");
    E2_CHECK(p.rows() == m, "concat_cols: row mismatch " + shape_str(p.shape()) +
                                " vs expected rows " + std::to_string(m));
    n += p.cols();
  }
  std::vector<double> out(static_cast<size_t>(m * n));
  int64_t c = 0;
  std::vector<Node*> nodes;
  std::vector<int64_t> col_of, width;
  for (const auto& p : parts) {
    int64_t w = p.cols();
    const auto& pd = p.data();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < w; ++j)
        out[static_cast<size_t>(i * n + c + j)] = pd[static_cast<size_t>(i * w + j)];
    nodes.push_back(p.node());
    col_of.push_back(c);
    width.push_back(w);
    c += w;
  }
  return make_op({m, n}, parts, std::move(out), [nodes, col_of, width, m, n](Node& self) {
    for (size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k]->requires_grad) continue;
      auto& g = nodes[k]->ensure_grad();
      int64_t w = width[k], c0 = col_of[k];
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < w; ++j)
          g[static_cast<size_t>(i * w + j)] += self.grad[static_cast<size_t>(i * n + c0 + j)];
    }
  });
}

Tensor take_rows(const Tensor& a, const std::vector<int64_t>& ids) {
  check_rank2(a, "take_rows");
  int64_t m = a.rows(), n = a.cols();
  std::vector<double> out;
  out.reserve(ids.size() * static_cast<size_t>(n));
  for (int64_t id : ids) {
    E2_CHECK(0 <= id && id < m, "take_rows: row index " + std::to_string(id) +
                                    " out of range for shape " + shape_str(a.shape()));
    out.insert(out.end(), a.data().begin() + id * n, a.data().begin() + (id + 1) * n);
  }
  Node* an = a.node();
  auto ids_copy = std::make_shared<std::vector<int64_t>>(ids);
  return make_op({static_cast<int64_t>(ids.size()), n}, {a}, std::move(out),
                 [an, ids_copy, n](Node& self) {
                   auto& g = an->ensure_grad();
                   for (size_t k = 0; k < ids_copy->size(); ++k) {
                     size_t dst = static_cast<size_t>((*ids_copy)[k] * n);
                     size_t src = k * static_cast<size_t>(n);
                     for (int64_t j = 0; j < n; ++j) g[dst + j] += self.grad[src + j];
                   }
                 });
}

// ---------------------------------------------------------------- reductions

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  Node* an = a.node();
  return make_op({1}, {a}, {s}, [an](Node& self) {
    auto& g = an->ensure_grad();
    for (auto& x : g) x += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  double inv = 1.0 / static_cast<double>(a.numel());
  Node* an = a.node();
  return make_op({1}, {a}, {s * inv}, [an, inv](Node& self) {
    auto& g = an->ensure_grad();
    for (auto& x : g) x += self.grad[0] * inv;
  });
}

Tensor mean_rows(const Tensor& a) {
  check_rank2(a, "mean_rows");
  int64_t m = a.rows(), n = a.cols();
  E2_CHECK(m > 0, "mean_rows: empty tensor");
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  const auto& ad = a.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j)] += ad[static_cast<size_t>(i * n + j)];
  double inv = 1.0 / static_cast<double>(m);
  for (auto& x : out) x *= inv;
  Node* an = a.node();
  return make_op({n}, {a}, std::move(out), [an, m, n, inv](Node& self) {
    auto& g = an->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        g[static_cast<size_t>(i * n + j)] += self.grad[static_cast<size_t>(j)] * inv;
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets) {
  check_rank2(logits, "cross_entropy");
  int64_t b = logits.rows(), c = logits.cols();
  E2_CHECK(static_cast<int64_t>(targets.size()) == b,
           "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
               std::to_string(b) + " logit rows");
  for (int64_t t : targets)
    E2_CHECK(0 <= t && t < c, "cross_entropy: target " + std::to_string(t) +
                                  " out of range [0," + std::to_string(c) + ")");
  const auto& ld = logits.data();
  // cache softmax for the backward pass
  auto probs = std::make_shared<std::vector<double>>(ld.size());
  double loss = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const double* row = ld.data() + i * c;
    double mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
    double lse = mx + std::log(sum);
    loss += lse - row[targets[static_cast<size_t>(i)]];
    for (int64_t j = 0; j < c; ++j)
      (*probs)[static_cast<size_t>(i * c + j)] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(b);
  Node* ln = logits.node();
  auto tg = std::make_shared<std::vector<int64_t>>(targets);
  return make_op({1}, {logits}, {loss}, [ln, probs, tg, b, c](Node& self) {
    auto& g = ln->ensure_grad();
    double d = self.grad[0] / static_cast<double>(b);
    for (int64_t i = 0; i < b; ++i) {
      for (int64_t j = 0; j < c; ++j)
        g[static_cast<size_t>(i * c + j)] += d * (*probs)[static_cast<size_t>(i * c + j)];
      g[static_cast<size_t>(i * c + (*tg)[static_cast<size_t>(i)])] -= d;
    }
  });
}

// ---------------------------------------------------------------- backward

void backward(const Tensor& loss) {
  E2_CHECK(loss.defined(), "backward: null Tensor");
  E2_CHECK(loss.numel() == 1,
           "backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // iterative post-order DFS -> topological order
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps,
                  int64_t min_coords, uint64_t seed) {
  Tensor x0 = x.detached(true);
  Tensor loss = f(x0);
  E2_CHECK(loss.numel() == 1, "grad_check: f must be scalar-valued");
  backward(loss);
  std::vector<double> analytic = x0.grad();

  std::vector<int64_t> coords;
  int64_t n = x.numel();
  if (n <= min_coords) {
    coords.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
  } else {
    Rng rng(derive_seed(seed, "grad_check"));
    std::unordered_set<int64_t> picked;
    while (static_cast<int64_t>(picked.size()) < min_coords)
      picked.insert(rng.randint(0, n - 1));
    coords.assign(picked.begin(), picked.end());
    std::sort(coords.begin(), coords.end());
  }

  double worst = 0.0;
  for (int64_t i : coords) {
    Tensor xp = x.detached(false);
    xp.mutable_data()[static_cast<size_t>(i)] += eps;
    double fp = f(xp).item();
    Tensor xm = x.detached(false);
    xm.mutable_data()[static_cast<size_t>(i)] -= eps;
    double fm = f(xm).item();
    double numeric = (fp - fm) / (2.0 * eps);
    double a = analytic[static_cast<size_t>(i)];
    double denom = std::max({std::fabs(a), std::fabs(numeric), 1.0});
    worst = std::max(worst, std::fabs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace e2
