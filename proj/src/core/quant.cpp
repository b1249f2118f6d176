#include "core/quant.hpp"

#include <algorithm>

namespace xbt {

QuantGrid make_grid(const Range& range) { return make_grid(range.min, range.max, range.bits); }

QuantGrid make_grid(double min, double max, int bits) {
  require(min < max, ErrorCode::range,
          "degenerate range [" + std::to_string(min) + ", " + std::to_string(max) + "]");
  require(bits >= 2 && bits <= 8, ErrorCode::range, "bits must be in [2,8], got " + std::to_string(bits));

  QuantGrid g;
  g.levels = 1 << bits;
  const int n1 = g.levels - 1;
  g.scale = (max - min) / static_cast<double>(n1);
  double z = round_ties_even(-min / g.scale);
  z = std::clamp(z, 0.0, static_cast<double>(n1));
  g.zero_point = static_cast<int>(z);
  g.nudged_min = -(z * g.scale);
  g.nudged_max = g.nudged_min + n1 * g.scale;
  return g;
}

double quantize_value(double t, const QuantGrid& grid) {
  const double c = std::clamp(t, grid.nudged_min, grid.nudged_max);
  const double k = round_ties_even((c - grid.nudged_min) / grid.scale);
  return grid.nudged_min + k * grid.scale;
}

void quantize_range_grads(double t, const QuantGrid& grid, double* d_min, double* d_max) {
  const double n1 = static_cast<double>(grid.levels - 1);
  double k;
  if (t <= grid.nudged_min) {
    k = 0.0;
  } else if (t >= grid.nudged_max) {
    k = n1;
  } else {
    k = round_ties_even((t - grid.nudged_min) / grid.scale);
  }
  const double r = (k - static_cast<double>(grid.zero_point)) / n1;
  if (d_min) *d_min = -r;
  if (d_max) *d_max = r;
}

void GlobalVariableSet::validate() const {
  require(x.min < x.max && y.min < y.max && w.min < w.max && b.min < b.max, ErrorCode::range,
          "every active range needs min < max");
  require(do_q == 0 || do_q == 1, ErrorCode::argument, "do_q must be 0 or 1");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::argument, "alpha must be in [0,1]");
  if (unipolar_w) require(w.min == 0.0, ErrorCode::range, "unipolar weight range must have min == 0");
}

void update_global_range(Range& range, const std::vector<LayerStats>& stats, RangePolicy policy,
                         double lambda, bool pin_min_zero) {
  if (policy == RangePolicy::gradient || range.trainable) return;
  require(!stats.empty(), ErrorCode::argument, "update_global_range: empty stats list");
  double lo = stats[0].min;
  double hi = stats[0].max;
  for (const auto& s : stats) {
    lo = std::min(lo, s.min);
    hi = std::max(hi, s.max);
  }
  range.min = lambda * range.min + (1.0 - lambda) * lo;
  range.max = lambda * range.max + (1.0 - lambda) * hi;
  if (pin_min_zero) range.min = 0.0;
  if (range.max <= range.min) range.max = range.min + 1e-6;
}

std::string to_string(ActivationKind k) {
  return k == ActivationKind::relu ? "relu" : "shifted_tanh";
}

std::optional<ActivationKind> activation_from_string(const std::string& s) {
  if (s == "relu") return ActivationKind::relu;
  if (s == "shifted_tanh") return ActivationKind::shifted_tanh;
  return std::nullopt;
}

}  // namespace xbt
