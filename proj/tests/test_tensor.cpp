#include <doctest.h>

#include <cmath>

#include "e2/tensor.hpp"
#include "testutil.hpp"

using namespace e2;

TEST_CASE("matmul basics") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = matmul(eye, a);
  CHECK(r.data() == a.data());

  Tensor b = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor c = Tensor::from_data({2, 1}, {5, 6});
  Tensor prod = matmul(b, c);
  CHECK(prod.at(0, 0) == doctest::Approx(17));
  CHECK(prod.at(1, 0) == doctest::Approx(39));

  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), std::runtime_error);
}

TEST_CASE("softmax rows") {
  Tensor z = softmax_lastdim(Tensor::from_data({1, 3}, {0, 0, 0}));
  for (double v : z.data()) CHECK(v == doctest::Approx(1.0 / 3));

  Rng rng(1);
  Tensor x = Tensor::randn({5, 9}, rng, 3.0);
  Tensor s = softmax_lastdim(x);
  for (int64_t i = 0; i < 5; ++i) {
    double sum = 0;
    for (int64_t j = 0; j < 9; ++j) {
      CHECK(s.at(i, j) >= 0.0);
      sum += s.at(i, j);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("cross entropy values") {
  // uniform logits over 7 classes -> ln 7
  Tensor u = Tensor::zeros({3, 7});
  CHECK(cross_entropy(u, {0, 3, 6}).item() == doctest::Approx(std::log(7.0)).epsilon(1e-12));

  // huge margin on the correct class -> ~0
  std::vector<double> hot(7, 0.0);
  hot[2] = 30.0;
  CHECK(cross_entropy(Tensor::from_data({1, 7}, hot), {2}).item() < 1e-9);

  // random case against an independently coded log-sum-exp
  Rng rng(7);
  Tensor logits = Tensor::randn({4, 7}, rng, 2.0);
  std::vector<int64_t> targets = {1, 0, 6, 3};
  double expect = 0;
  for (int64_t i = 0; i < 4; ++i) {
    double mx = -1e300, lse = 0;
    for (int64_t j = 0; j < 7; ++j) mx = std::max(mx, logits.at(i, j));
    for (int64_t j = 0; j < 7; ++j) lse += std::exp(logits.at(i, j) - mx);
    expect += mx + std::log(lse) - logits.at(i, targets[static_cast<size_t>(i)]);
  }
  expect /= 4;
  CHECK(cross_entropy(logits, targets).item() == doctest::Approx(expect).epsilon(1e-10));

  CHECK_THROWS(cross_entropy(u, {0, 7, 1}));
}

TEST_CASE("backward accumulation and zeros") {
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  Tensor loss = sum_all(scale(x, 2.0));
  backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(2.0));

  // a leaf used twice accumulates twice
  Tensor y = Tensor::from_data({2, 2}, {1, 1, 1, 1}, true);
  Tensor l2 = sum_all(add(y, y));
  backward(l2);
  for (double g : y.grad()) CHECK(g == doctest::Approx(2.0));

  // a leaf the loss does not depend on gets exactly zero
  Tensor z = Tensor::from_data({2}, {5, 5}, true);
  Tensor l3 = sum_all(y.detached(true));
  backward(l3);
  for (double g : z.grad()) CHECK(g == 0.0);

  CHECK_THROWS(backward(x));  // non-scalar root
}

TEST_CASE("grad_check on every core op") {
  Rng rng(11);
  Tensor x = Tensor::randn({4, 6}, rng, 1.0);
  Tensor w = Tensor::randn({6, 5}, rng, 1.0);
  Tensor bias = Tensor::randn({6}, rng, 1.0);
  Tensor gain = Tensor::randn({6}, rng, 0.3);

  auto check = [&](const char* name, const std::function<Tensor(const Tensor&)>& f,
                   const Tensor& at, double tol = 1e-6) {
    double err = grad_check(f, at, 1e-5, 200, 99);
    INFO(name);
    CHECK(err < tol);
  };

  check("matmul", [&](const Tensor& t) { return mean_all(matmul(t, w)); }, x);
  check("matmul_rhs", [&](const Tensor& t) { return mean_all(matmul(x, t)); }, w);
  check("add", [&](const Tensor& t) { return mean_all(add(t, x)); }, x);
  check("add_rowwise", [&](const Tensor& t) { return mean_all(add_rowwise(x, t)); }, bias);
  check("mul", [&](const Tensor& t) { return mean_all(mul(t, x)); }, x);
  check("scale", [&](const Tensor& t) { return sum_all(scale(t, 0.37)); }, x);
  check("gelu", [&](const Tensor& t) { return mean_all(gelu(t)); }, x);
  check("softmax", [&](const Tensor& t) { return mean_all(mul(softmax_lastdim(t), x)); }, x);
  check("layernorm",
        [&](const Tensor& t) { return mean_all(layernorm_lastdim(t, gain, bias)); }, x);
  check("layernorm_gain",
        [&](const Tensor& t) { return mean_all(layernorm_lastdim(x, t, bias)); }, gain);
  check("transpose", [&](const Tensor& t) { return mean_all(matmul(transpose(t), t)); }, x);
  check("take_rows", [&](const Tensor& t) { return mean_all(take_rows(t, {0, 2, 2, 3})); }, x);
  check("slice", [&](const Tensor& t) { return mean_all(slice_cols(slice_rows(t, 1, 4), 0, 3)); }, x);
  check("concat", [&](const Tensor& t) { return mean_all(concat_rows({t, scale(t, 2.0)})); }, x);
  check("concat_cols", [&](const Tensor& t) { return mean_all(concat_cols({t, mul(t, t)})); }, x);
  check("mean_rows", [&](const Tensor& t) { return sum_all(mean_rows(t)); }, x);
  check("reshape", [&](const Tensor& t) { return mean_all(gelu(reshape(t, {6, 4}))); }, x);
  check("cross_entropy",
        [&](const Tensor& t) { return cross_entropy(matmul(t, w), {0, 4, 2, 1}); }, x);

  // quadratic form: central differences are near-exact
  Tensor q = Tensor::randn({5, 5}, rng, 1.0);
  double err = grad_check(
      [&](const Tensor& t) { return mean_all(mul(matmul(t, q), t)); },
      Tensor::randn({3, 5}, rng, 1.0), 1e-5, 200, 5);
  CHECK(err < 1e-9);

  // softmax + cross-entropy composite
  double err2 = grad_check(
      [&](const Tensor& t) {
        return cross_entropy(matmul(gelu(t), w), {1, 2, 3, 0});
      },
      x, 1e-5, 200, 6);
  CHECK(err2 < 1e-6);
}

TEST_CASE("shape errors name both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 4});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[4,4]"), std::runtime_error);
  CHECK_THROWS_WITH_AS(add_rowwise(a, Tensor::zeros({7})), doctest::Contains("[7]"),
                       std::runtime_error);
}
