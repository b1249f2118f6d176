#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <functional>
#include <vector>

#include "core/dataset.hpp"
#include "core/nn.hpp"

namespace oracle {

// Central finite differences, h = 1e-5 by default.
std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x, double h = 1e-5);

double max_rel_err(const std::vector<double>& got, const std::vector<double>& want,
                   double denom_floor = 1e-6);

// Independent scalar re-implementation of the globally quantized forward pass
// for dense-only networks (plain loops, its own grid math).
struct ScalarDenseLayer {
  std::vector<std::vector<double>> w;  // [in][out]
  std::vector<double> b;
  bool hidden = true;  // hidden layers apply the activation + y-quant
};

struct ScalarQuantSpec {
  double x_min, x_max;
  double w_min, w_max;
  double b_min, b_max;
  double y_min, y_max;
  double out_x_min, out_x_max, out_w_min, out_w_max, out_b_min, out_b_max, out_y_min, out_y_max;
  int x_bits = 4, w_bits = 4, b_bits = 4, y_bits = 4;
  bool relu_act = true;  // false = tanh(x - th)
  double th = 0.0;
};

std::vector<double> scalar_quantized_forward(const std::vector<ScalarDenseLayer>& layers,
                                             const ScalarQuantSpec& spec,
                                             const std::vector<double>& input);

// Brute-force MAC enumeration: walks every output element of every trainable
// layer and counts its multiplications one by one.
int64_t enumerate_macs(const xbt::NetworkGraph& net);
int64_t enumerate_inputs(const xbt::NetworkGraph& net);   // DAC conversions
int64_t enumerate_outputs(const xbt::NetworkGraph& net);  // ADC conversions

// Brute-force tile coverage: assigns every weight cell to its block and
// counts distinct blocks.
int64_t enumerate_tiles(int rows, int cols, int uni_cols, int tile_rows, int tile_cols);

// Nearest-centroid classifier accuracy (train split centroids, eval split).
double centroid_accuracy(const xbt::Dataset& ds);

}  // namespace oracle
