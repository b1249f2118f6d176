#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "core/autodiff.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace xbt;

namespace {

Tensor t2x2(double a, double b, double c, double d) { return Tensor({2, 2}, {a, b, c, d}); }

std::vector<double> tape_grad_wrt_first(
    const std::function<Value(Tape&, Value)>& graph, const std::vector<double>& x0,
    const Shape& shape) {
  Tape tape;
  Value x = tape.leaf(Tensor(shape, x0), true);
  Value loss = graph(tape, x);
  tape.backward(loss);
  return tape.grad(x);
}

double tape_eval(const std::function<Value(Tape&, Value)>& graph, const std::vector<double>& x0,
                 const Shape& shape) {
  Tape tape;
  Value x = tape.leaf(Tensor(shape, x0), false);
  return tape.value(graph(tape, x)).item();
}

void check_fd(const std::function<Value(Tape&, Value)>& graph, const std::vector<double>& x0,
              const Shape& shape, double tol = 1e-4) {
  const auto got = tape_grad_wrt_first(graph, x0, shape);
  const auto want = oracle::finite_diff([&](const std::vector<double>& x) {
    return tape_eval(graph, x, shape);
  }, x0);
  CHECK(oracle::max_rel_err(got, want) < tol);
}

}  // namespace

TEST_CASE("matmul identity") {
  Tape tape;
  Value i2 = tape.leaf(t2x2(1, 0, 0, 1));
  Value m = tape.leaf(t2x2(3.5, -1.25, 2.0, 7.75));
  const Tensor& c = tape.value(tape.matmul(i2, m));
  for (int i = 0; i < 4; ++i) CHECK(c[i] == tape.value(m)[i]);
}

TEST_CASE("matmul hand expansion") {
  Tape tape;
  Value a = tape.leaf(t2x2(1, 2, 3, 4));
  Value b = tape.leaf(Tensor({2, 1}, {1, 1}));
  const Tensor& c = tape.value(tape.matmul(a, b));
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 7.0);
}

TEST_CASE("matmul shape mismatch is a dimension error") {
  Tape tape;
  Value a = tape.leaf(Tensor({2, 3}, 1.0));
  Value b = tape.leaf(Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(tape.matmul(a, b), Error);
}

TEST_CASE("grad of sum(matmul) w.r.t. A is the row-broadcast of B's column sums") {
  const std::vector<double> bdata = {0.5, -1.5, 2.0, 1.0, 3.0, -0.25};
  Tape tape;
  Value a = tape.leaf(t2x2(1, 2, 3, 4), true);
  Value b = tape.leaf(Tensor({2, 3}, bdata));
  Value loss = tape.sum(tape.matmul(a, b));
  tape.backward(loss);
  const auto& da = tape.grad(a);
  // dA[i][k] = sum_j B[k][j]
  CHECK(da[0] == doctest::Approx(0.5 - 1.5 + 2.0));
  CHECK(da[1] == doctest::Approx(1.0 + 3.0 - 0.25));
  CHECK(da[2] == doctest::Approx(da[0]));
  CHECK(da[3] == doctest::Approx(da[1]));

  check_fd(
      [&](Tape& t, Value x) { return t.sum(t.matmul(x, t.leaf(Tensor({2, 3}, bdata)))); },
      {1, 2, 3, 4}, {2, 2});
}

TEST_CASE("conv2d 1x1 identity kernel") {
  Tape tape;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-2, 2);
  Tensor x({1, 3, 3, 1});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = uni(rng);
  Value vx = tape.leaf(x);
  Value k = tape.leaf(Tensor({1, 1, 1, 1}, {1.0}));
  const Tensor& y = tape.value(tape.conv2d(vx, k, 1, Padding::valid));
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d ones: 4x4 input, 2x2 kernel, valid -> 3x3 of 4s") {
  Tape tape;
  Value x = tape.leaf(Tensor({1, 4, 4, 1}, 1.0));
  Value k = tape.leaf(Tensor({2, 2, 1, 1}, 1.0));
  const Tensor& y = tape.value(tape.conv2d(x, k, 1, Padding::valid));
  CHECK(y.shape() == Shape{1, 3, 3, 1});
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == 4.0);
}

TEST_CASE("conv2d kernel larger than input errors") {
  Tape tape;
  Value x = tape.leaf(Tensor({1, 2, 2, 1}, 1.0));
  Value k = tape.leaf(Tensor({3, 3, 1, 1}, 1.0));
  CHECK_THROWS_AS(tape.conv2d(x, k, 1, Padding::valid), Error);
}

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-2, 2);
  std::vector<double> x0(1 * 4 * 4 * 2);
  for (auto& v : x0) v = uni(rng);
  std::vector<double> k0(2 * 2 * 2 * 3);
  for (auto& v : k0) v = uni(rng);

  // w.r.t. input
  check_fd(
      [&](Tape& t, Value x) {
        Value k = t.leaf(Tensor({2, 2, 2, 3}, k0));
        return t.sum(t.mul(t.conv2d(x, k, 1, Padding::same), t.conv2d(x, k, 1, Padding::same)));
      },
      x0, {1, 4, 4, 2});
  // w.r.t. kernel
  check_fd(
      [&](Tape& t, Value k) {
        Value x = t.leaf(Tensor({1, 4, 4, 2}, x0));
        Value y = t.conv2d(x, k, 2, Padding::valid);
        return t.sum(t.mul(y, y));
      },
      k0, {2, 2, 2, 3});
}

TEST_CASE("elementwise values") {
  Tape tape;
  Value x = tape.leaf(Tensor({3}, {-3.0, 0.0, 1.0}));
  const Tensor& r = tape.value(tape.relu(x));
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 1.0);
  const Tensor& th = tape.value(tape.tanh_op(x));
  CHECK(th[2] == doctest::Approx(0.7615941559557649).epsilon(1e-12));

  // d/dx tanh at 0 is exactly 1
  Tape t2;
  Value z = t2.leaf(Tensor::scalar(0.0), true);
  t2.backward(t2.tanh_op(z));
  CHECK(t2.grad(z)[0] == 1.0);
}

TEST_CASE("broadcast rules: scalar and bias-row only") {
  Tape tape;
  Value m = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Value row = tape.leaf(Tensor({3}, {10, 20, 30}));
  const Tensor& y = tape.value(tape.add(m, row));
  CHECK(y[0] == 11.0);
  CHECK(y[5] == 36.0);
  Value bad = tape.leaf(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(tape.add(m, bad), Error);
}

TEST_CASE("softmax cross entropy: uniform logits give ln K") {
  Tape tape;
  Value logits = tape.leaf(Tensor({1, 10}, 0.25));
  Value loss = tape.softmax_cross_entropy(logits, {3});
  CHECK(tape.value(loss).item() == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy: confident logits") {
  Tape tape;
  Value logits = tape.leaf(Tensor({1, 2}, {10.0, 0.0}));
  Value loss = tape.softmax_cross_entropy(logits, {0});
  CHECK(tape.value(loss).item() == doctest::Approx(std::log(1.0 + std::exp(-10.0))).epsilon(1e-9));
  CHECK(tape.value(loss).item() == doctest::Approx(4.54e-5).epsilon(1e-2));
}

TEST_CASE("softmax cross entropy: label out of range") {
  Tape tape;
  Value logits = tape.leaf(Tensor({1, 2}, {0.0, 0.0}));
  CHECK_THROWS_AS(tape.softmax_cross_entropy(logits, {2}), Error);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-2, 2);
  std::vector<double> l0(2 * 4);
  for (auto& v : l0) v = uni(rng);
  check_fd(
      [&](Tape& t, Value l) { return t.softmax_cross_entropy(l, {1, 3}); }, l0, {2, 4});
}

TEST_CASE("gradient property: random composite graphs match finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x0(6);
    for (auto& v : x0) v = uni(rng);
    std::vector<double> w0(6);
    for (auto& v : w0) v = uni(rng);
    check_fd(
        [&](Tape& t, Value x) {
          Value w = t.leaf(Tensor({3, 2}, w0));
          Value h = t.tanh_op(t.matmul(x, w));
          Value r = t.relu(t.sub(h, t.leaf(Tensor::scalar(0.1))));
          return t.mean(t.mul(h, r));
        },
        x0, {2, 3});
  }
}

TEST_CASE("fan-out gradients accumulate") {
  Tape tape;
  Value x = tape.leaf(Tensor::scalar(3.0), true);
  // y = x*x + x: dy/dx = 2x + 1 = 7, reached through two consumers of x.
  Value y = tape.add(tape.mul(x, x), x);
  tape.backward(y);
  CHECK(tape.grad(x)[0] == doctest::Approx(7.0));
}

TEST_CASE("forward results are deterministic") {
  auto build = [] {
    Tape tape;
    Tensor x({4, 4});
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uni(-1, 1);
    for (int64_t i = 0; i < x.size(); ++i) x[i] = uni(rng);
    Value v = tape.leaf(x);
    Value y = tape.matmul(tape.tanh_op(v), v);
    return tape.value(y).vec();
  };
  const auto a = build();
  const auto b = build();
  CHECK(a == b);
}
