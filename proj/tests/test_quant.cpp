#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <set>

#include "core/autodiff.hpp"
#include "core/quant.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace xbt;

TEST_CASE("make_grid nudges [-1,1] at 4 bits") {
  const QuantGrid g = make_grid(-1.0, 1.0, 4);
  CHECK(g.scale == doctest::Approx(2.0 / 15.0).epsilon(1e-12));
  CHECK(g.zero_point == 8);
  CHECK(g.nudged_min == doctest::Approx(-1.0666667).epsilon(1e-6));
  CHECK(g.nudged_max == doctest::Approx(0.9333333).epsilon(1e-6));
}

TEST_CASE("make_grid: [0,1] at 2 bits is already aligned") {
  const QuantGrid g = make_grid(0.0, 1.0, 2);
  CHECK(g.zero_point == 0);
  CHECK(g.nudged_min == 0.0);
  CHECK(g.nudged_max == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(quantize_value(1.0 / 3.0, g) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("any range containing zero has zero exactly on the grid") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lo(-5.0, -0.01), hi(0.01, 5.0);
  for (int i = 0; i < 200; ++i) {
    const int bits = 2 + static_cast<int>(rng() % 7);
    const QuantGrid g = make_grid(lo(rng), hi(rng), bits);
    CHECK(quantize_value(0.0, g) == 0.0);
  }
}

TEST_CASE("degenerate range is a range error") {
  CHECK_THROWS_AS(make_grid(0.5, 0.5, 4), Error);
}

TEST_CASE("fake quant: nearest level, brute-forced over all 16 levels") {
  const QuantGrid g = make_grid(-1.0, 1.0, 4);
  const double t = 0.26;
  // Independent nearest-level search.
  double best = g.level(0);
  for (int k = 1; k < g.levels; ++k)
    if (std::abs(g.level(k) - t) < std::abs(best - t)) best = g.level(k);
  CHECK(quantize_value(t, g) == doctest::Approx(best).epsilon(1e-12));
  CHECK(quantize_value(t, g) == doctest::Approx(2.0 * g.scale).epsilon(1e-12));
}

TEST_CASE("fake quant STE: clipped region passes no gradient") {
  const QuantGrid g = make_grid(-1.0, 1.0, 4);
  Tape tape;
  Value t = tape.leaf(Tensor::scalar(5.0), true);
  Value q = tape.fake_quant(t, g);
  tape.backward(tape.sum(q));
  CHECK(tape.grad(t)[0] == 0.0);
}

TEST_CASE("fake quant STE: inside the range the gradient passes unchanged") {
  const QuantGrid g = make_grid(-1.0, 1.0, 4);
  Tape tape;
  Value t = tape.leaf(Tensor({3}, {0.26, -0.9, 0.5}), true);
  tape.backward(tape.sum(tape.fake_quant(t, g)));
  for (double d : tape.grad(t)) CHECK(d == 1.0);
}

TEST_CASE("quant properties: idempotence, monotonicity, bound, cardinality") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lo(-3.0, -0.1), hi(0.1, 3.0), pt(-4.0, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int bits = 2 + static_cast<int>(rng() % 7);
    const QuantGrid g = make_grid(lo(rng), hi(rng), bits);
    std::set<double> seen;
    double prev_t = -1e9, prev_q = -1e9;
    std::vector<double> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(pt(rng));
    std::sort(pts.begin(), pts.end());
    for (double t : pts) {
      const double qv = quantize_value(t, g);
      CHECK(quantize_value(qv, g) == qv);  // idempotence
      CHECK(t >= prev_t);
      CHECK(qv >= prev_q);  // monotonicity on sorted inputs
      prev_t = t;
      prev_q = qv;
      const double clamped = std::clamp(t, g.nudged_min, g.nudged_max);
      CHECK(std::abs(qv - clamped) <= g.scale / 2.0 + 1e-12);  // bound
      seen.insert(qv);
    }
    CHECK(static_cast<int>(seen.size()) <= g.levels);  // cardinality
  }
}

TEST_CASE("alpha blend endpoints and midpoint") {
  const QuantGrid g = make_grid(-1.0, 1.0, 4);
  Tape tape;
  Value t = tape.leaf(Tensor::scalar(0.26), true);

  const Tensor& a0 = tape.value(tape.alpha_blend_quant(t, g, 0.0));
  CHECK(a0.item() == 0.26);
  const Tensor& a1 = tape.value(tape.alpha_blend_quant(t, g, 1.0));
  CHECK(a1.item() == quantize_value(0.26, g));
  const Tensor& ah = tape.value(tape.alpha_blend_quant(t, g, 0.5));
  CHECK(ah.item() == doctest::Approx(0.2633333).epsilon(1e-6));

  CHECK_THROWS_AS(tape.alpha_blend_quant(t, g, 1.5), Error);
}

TEST_CASE("alpha blend gradients blend the STE and identity rules") {
  const QuantGrid g = make_grid(-1.0, 1.0, 4);
  // Inside the clip range both rules give 1, so any alpha gives 1.
  {
    Tape tape;
    Value t = tape.leaf(Tensor::scalar(0.26), true);
    tape.backward(tape.sum(tape.alpha_blend_quant(t, g, 0.3)));
    CHECK(tape.grad(t)[0] == doctest::Approx(1.0));
  }
  // In the clipped region the STE side contributes zero.
  {
    Tape tape;
    Value t = tape.leaf(Tensor::scalar(5.0), true);
    tape.backward(tape.sum(tape.alpha_blend_quant(t, g, 0.3)));
    CHECK(tape.grad(t)[0] == doctest::Approx(0.7));
  }
}

TEST_CASE("trainable range endpoints: gradients match finite differences away from jumps") {
  // q as a function of (min, max) is piecewise linear between level jumps;
  // the implementation returns the exact local derivative there.
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> uni(-0.9, 0.9);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 100; ++trial) {
    const double tv = uni(rng);
    const int bits = 4;
    auto eval = [&](const std::vector<double>& mm) {
      Tape tape;
      Value t = tape.leaf(Tensor::scalar(tv));
      Value lo = tape.leaf(Tensor::scalar(mm[0]));
      Value hi = tape.leaf(Tensor::scalar(mm[1]));
      return tape.value(tape.sum(tape.fake_quant(t, lo, hi, bits))).item();
    };
    const std::vector<double> mm = {-1.0 + 0.001 * trial, 1.0 + 0.0017 * trial};
    // Skip points too close to a level jump for the FD stencil.
    const QuantGrid g = make_grid(mm[0], mm[1], bits);
    const double pos = (std::clamp(tv, g.nudged_min, g.nudged_max) - g.nudged_min) / g.scale;
    if (std::abs(pos - std::nearbyint(pos)) < 0.05 && tv > g.nudged_min && tv < g.nudged_max)
      continue;

    Tape tape;
    Value t = tape.leaf(Tensor::scalar(tv));
    Value lo = tape.leaf(Tensor::scalar(mm[0]), true);
    Value hi = tape.leaf(Tensor::scalar(mm[1]), true);
    tape.backward(tape.sum(tape.fake_quant(t, lo, hi, bits)));
    const std::vector<double> got = {tape.grad(lo)[0], tape.grad(hi)[0]};
    const auto want = oracle::finite_diff(eval, mm, 1e-6);
    CHECK(oracle::max_rel_err(got, want, 1e-3) < 1e-3);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("ema range update policies") {
  Range r{-1.0, 1.0, 4, false};
  // lambda = 1 leaves ranges unchanged
  update_global_range(r, {{-0.5, 0.7, 0.0, 0.1}}, RangePolicy::ema, 1.0);
  CHECK(r.min == -1.0);
  CHECK(r.max == 1.0);
  // lambda = 0 jumps to the envelope over all layers
  update_global_range(r, {{-0.4, 0.2, 0, 0}, {-0.9, 0.6, 0, 0}}, RangePolicy::ema, 0.0);
  CHECK(r.min == -0.9);
  CHECK(r.max == 0.6);
  // EMA formula
  r = Range{-1.0, 1.0, 4, false};
  update_global_range(r, {{-0.5, 0.5, 0, 0}}, RangePolicy::ema, 0.9);
  CHECK(r.min == doctest::Approx(-0.95));
  CHECK(r.max == doctest::Approx(0.95));
  // gradient policy is a no-op here
  r = Range{-1.0, 1.0, 4, true};
  update_global_range(r, {{-9, 9, 0, 0}}, RangePolicy::gradient, 0.0);
  CHECK(r.min == -1.0);
  Range plain{-1.0, 1.0, 4, false};
  CHECK_THROWS_AS(update_global_range(plain, {}, RangePolicy::ema, 0.5), Error);
}

TEST_CASE("do_q = 0 makes quantized forward equal float forward exactly") {
  // The gate is honored at graph build time; checked end to end in test_nn.
  GlobalVariableSet s;
  s.do_q = 0;
  CHECK_NOTHROW(s.validate());
  s.do_q = 2;
  CHECK_THROWS_AS(s.validate(), Error);
}
