#include <cmath>

#include "doctest.h"
#include "mcn/autodiff.h"
#include "mcn/rng.h"

using namespace mcn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("splitmix64 matches the reference stream") {
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(derive_seed(1, {2}) != derive_seed(2, {1}));
  CHECK(derive_seed(5, {1, 2}) == derive_seed(5, {1, 2}));
}

TEST_CASE("matmul forward and backward on a 2x2 oracle") {
  ParamSet p;
  p.add("a", Tensor(Shape{2, 2}, {1, 2, 3, 4}));
  p.add("b", Tensor(Shape{2, 2}, {5, 6, 7, 8}));
  auto b = p.bind();
  Var c = matmul(b["a"], b["b"]);
  CHECK(c.value().data == std::vector<double>{19, 22, 43, 50});
  auto g = backward(sum(c), b);
  // d sum(AB)/dA = 1 B^T, d/dB = A^T 1.
  CHECK(g["a"].data == std::vector<double>{11, 15, 11, 15});
  CHECK(g["b"].data == std::vector<double>{4, 4, 6, 6});
}

TEST_CASE("logsumexp is shift-stable and matches the direct formula") {
  Var x = constant(Tensor(Shape{1, 3}, {1000.0, 1000.0, 1000.0}));
  CHECK(logsumexp(x, 1).value()[0] == doctest::Approx(1000.0 + std::log(3.0)).epsilon(1e-15));
  Var y = constant(Tensor(Shape{2, 1}, {0.0, std::log(3.0)}));
  CHECK(logsumexp(y, 0).value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("l2_normalize_rows yields unit rows and canonical zero rows") {
  Var x = constant(Tensor(Shape{2, 2}, {3, 4, 0, 0}));
  Var n = l2_normalize_rows(x, true);
  CHECK(n.value()(0, 0) == doctest::Approx(0.6));
  CHECK(n.value()(0, 1) == doctest::Approx(0.8));
  const double r1 = std::hypot(n.value()(1, 0), n.value()(1, 1));
  CHECK(r1 == doctest::Approx(1.0));
}

TEST_CASE("gradient accumulates over shared subexpressions") {
  ParamSet p;
  p.add("x", Tensor::scalar(3.0));
  auto b = p.bind();
  Var y = mul(b["x"], b["x"]);
  Var z = add(y, b["x"]);  // x^2 + x
  auto g = backward(z, b);
  CHECK(g["x"][0] == 7.0);
}

TEST_CASE("relu, abs and clamp subgradients at the kink are zero or pass-through") {
  ParamSet p;
  p.add("x", Tensor(Shape{3}, {-1.0, 0.5, 2.0}));
  auto b = p.bind();
  auto g = backward(sum(clamp(b["x"], 0.0, 1.0)), b);
  CHECK(g["x"].data == std::vector<double>{0.0, 1.0, 0.0});
  auto b2 = p.bind();
  auto g2 = backward(sum(abs(b2["x"])), b2);
  CHECK(g2["x"].data == std::vector<double>{-1.0, 1.0, 1.0});
}

TEST_CASE("analytic and numeric gradients agree on a composed expression") {
  ParamSet p;
  p.add("w", random_tensor({3, 4}, 11));
  p.add("v", random_tensor({4}, 12));
  const Tensor x = random_tensor({5, 3}, 13);
  auto f = [&](const BoundParams& b) {
    Var h = sigmoid(add_row(matmul(constant(x), b["w"]), b["v"]));
    return mean(logsumexp(l2_normalize_rows(h), 1));
  };
  auto b = p.bind();
  const GradMap analytic = backward(f(b), b);
  const GradMap numeric = numeric_grad([&](const ParamSet& q) { return f(q.bind()).item(); }, p);
  CHECK(max_relative_error(analytic, numeric) < 1e-6);
}

TEST_CASE("sgd_step subtracts lr times the gradient and requires every entry") {
  ParamSet p;
  p.add("a", Tensor(Shape{2}, {1.0, 2.0}));
  p.add("b", Tensor(Shape{1}, {5.0}));
  GradMap g{{"a", Tensor(Shape{2}, {10.0, -10.0})}, {"b", Tensor(Shape{1}, {1.0})}};
  ParamSet q = sgd_step(p, g, 0.1);
  CHECK(q.at("a").data == std::vector<double>{0.0, 3.0});
  CHECK(q.at("b").data == std::vector<double>{4.9});
  CHECK(sgd_step(p, g, 0.0) == p);
  g.erase("b");
  CHECK_THROWS(sgd_step(p, g, 0.1));
}

TEST_CASE("max_relative_error uses the 1e-8 floor in the denominator") {
  Tensor a(Shape{2}, {1.0, 0.0});
  Tensor b(Shape{2}, {1.0 + 1e-6, 1e-9});
  CHECK(max_relative_error(a, b) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("shape mismatches are rejected") {
  Var a = constant(Tensor(Shape{2, 3}));
  Var b = constant(Tensor(Shape{2, 3}));
  CHECK_THROWS(matmul(a, b));
  CHECK_THROWS(add(a, constant(Tensor(Shape{3, 2}))));
}
