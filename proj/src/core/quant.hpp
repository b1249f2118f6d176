#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace xbt {

// Round-to-nearest with ties to even (the default FP rounding mode), used for
// every level-snapping decision so results are reproducible across platforms.
inline double round_ties_even(double x) { return std::rint(x); }

// One shared value range plus its precision. `trainable` selects the gradient
// update policy for the endpoints instead of the EMA recomputation.
struct Range {
  double min = -1.0;
  double max = 1.0;
  int bits = 4;
  bool trainable = false;
};

// Uniform quantization grid with 2^bits levels and an exactly representable
// zero: nudged_min = -zero_point * scale, level_k = nudged_min + k * scale.
struct QuantGrid {
  double nudged_min = 0.0;
  double nudged_max = 0.0;
  double scale = 0.0;
  int levels = 0;
  int zero_point = 0;

  double level(int k) const { return nudged_min + k * scale; }
};

// Builds the grid for a range: scale = (max-min)/(2^bits-1), then both ends
// are nudged so the zero point lands on an integer level.
QuantGrid make_grid(const Range& range);
QuantGrid make_grid(double min, double max, int bits);

// Forward projection onto the grid: clamp then round to the nearest level.
double quantize_value(double t, const QuantGrid& grid);

// STE pass-through mask: 1 inside [nudged_min, nudged_max], 0 outside.
inline double ste_mask(double t, const QuantGrid& g) {
  return (t >= g.nudged_min && t <= g.nudged_max) ? 1.0 : 0.0;
}

// Exact local derivatives of the quantized output w.r.t. the range endpoints,
// valid away from the points where the level index or zero point jumps.
// Holding k and z fixed, q = (k - z) * (max - min)/(n - 1).
void quantize_range_grads(double t, const QuantGrid& grid, double* d_min, double* d_max);

enum class ActivationKind { relu, shifted_tanh };

// The shared global variables V_g: ranges for inputs/activations/weights/
// biases, the activation-search logits and shift, plus the quantization gate
// and the alpha-blend factor. The output layer carries an independent copy.
struct GlobalVariableSet {
  Range x{-1.0, 1.0, 4, false};  // layer inputs
  Range y{-1.0, 1.0, 4, false};  // layer activations (outputs)
  Range w{-1.0, 1.0, 4, false};  // weights
  Range b{-1.0, 1.0, 4, false};  // biases
  double a_logits[2] = {0.0, 0.0};  // activation mix logits (relu, shifted-tanh)
  double th = 0.0;                  // tanh shift
  int do_q = 1;                     // 0 disables every quant node exactly
  double alpha = 1.0;               // blend factor in [0,1]
  bool unipolar_w = false;          // pins w.min to 0

  void validate() const;
};

struct LayerStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

enum class RangePolicy { ema, gradient };

// Recomputes the non-differentiable ranges from per-layer statistics.
// ema: new = lambda*old + (1-lambda)*envelope over all bound layers.
// gradient: endpoints are optimizer-owned scalars and this is a no-op.
void update_global_range(Range& range, const std::vector<LayerStats>& stats, RangePolicy policy,
                         double lambda, bool pin_min_zero = false);

std::string to_string(ActivationKind k);
std::optional<ActivationKind> activation_from_string(const std::string& s);

}  // namespace xbt
