#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/nn.hpp"

namespace xbt {

// NVM device behavior: programmable conductance grid plus optional
// programming noise (frozen once at deployment, never per read).
struct DeviceModel {
  double g_off = 0.0;       // siemens; 0 models an idealized OFF state
  double g_on = 100e-6;     // siemens
  int conductance_bits = 4;  // 0 = continuous (ideal) device
  double noise_sigma = 0.0;  // relative std-dev of the Gaussian perturbation

  void validate() const;
};

enum class ColumnScheme { unipolar, bipolar_paired };

// One fixed-size crossbar block holding a sub-matrix of a layer. Bipolar
// tiles consume physical columns in (positive, negative) pairs, so they carry
// half as many logical columns.
struct Tile {
  int rows = 0, cols = 0;  // physical extents
  std::vector<double> g;   // rows*cols conductances, row-major
  ColumnScheme scheme = ColumnScheme::unipolar;
  std::vector<double> bias_current;  // per logical column; only row-block 0 carries bias
  int layer_index = -1;
  int row_block = 0, col_block = 0;
  int active_rows = 0, logical_cols = 0;

  int logical_capacity() const { return scheme == ColumnScheme::bipolar_paired ? cols / 2 : cols; }
};

// Bitline currents for one tile given row voltages. Bipolar tiles apply the
// per-pair current subtractor, so the result has one entry per logical column.
std::vector<double> tile_mac(const Tile& tile, const std::vector<double>& v);

struct DacConfig {
  Range x;
  int bits = 4;
  double v_max = 1.0;
};

struct AdcConfig {
  Range y;
  int bits = 4;
  bool apply_activation = true;  // output layer digitizes raw pre-activations
  ActivationKind act = ActivationKind::relu;
  double th = 0.0;
};

// x is fake-quantized on the X grid at dac bits, then mapped linearly onto
// [0, v_max].
double dac_encode(double x, const DacConfig& dac);

// Affine weight-to-conductance calibration for one layer: weight level
// magnitudes (integer multiples of the grid scale) map onto integer device
// levels `level_stride` apart, so an ideal device reproduces the quantized
// weights exactly. level_stride == 0 falls back to nearest-level snapping
// (a lossy device with fewer levels than the weight grid).
struct ConductanceMap {
  double w_step = 0.0;      // weight grid scale
  int magnitude_cap = 0;    // max |level - zero_point| of the weight grid
  int level_stride = 0;     // device levels per weight step (0 = snap)
  double g_step = 0.0;      // device conductance step (0 for continuous)
  double g_off = 0.0, g_on = 0.0;
  double gain = 0.0;        // siemens per weight unit, for the digital decode

  double conductance_for_magnitude(double w_mag) const;
};

ConductanceMap calibrate_conductance(const QuantGrid& w_grid, const DeviceModel& dev);

// Single-weight mapping per the column scheme. Unipolar weights must be
// non-negative; bipolar returns the (positive, negative) pair.
double weight_to_conductance(double w, const QuantGrid& w_grid, const DeviceModel& dev);
std::pair<double, double> weight_to_conductance_bipolar(double w, const QuantGrid& w_grid,
                                                        const DeviceModel& dev);

struct ColumnGroup {
  int col_begin = 0, col_count = 0;
  ColumnScheme scheme = ColumnScheme::unipolar;
  std::vector<int> tile_ids;  // row-major over (row_block, col_block)
  int row_blocks = 0, col_blocks = 0;
};

struct LayerDeployment {
  int layer_index = -1;
  LayerKind kind = LayerKind::dense;
  int unrolled_rows = 0;  // kh*kw*C or X
  int out_cols = 0;       // F or Y
  int kh = 0, kw = 0, stride = 1;
  Padding pad = Padding::valid;
  std::vector<ColumnGroup> groups;
  DacConfig dac;
  AdcConfig adc;
  ConductanceMap cmap;
  std::vector<double> colsum;  // per logical column: sum of quantized weights
  int input_batches = 0;       // ceil(unrolled input elements / tile rows)
};

struct CrossbarDeployment {
  int tile_rows = 128, tile_cols = 128;
  DeviceModel device;
  QuantScheme scheme = QuantScheme::global_shared;
  std::vector<Tile> tiles;
  std::vector<LayerDeployment> layers;
  NetworkGraph net;  // hardened, projected copy used as the digital reference
  bool reconfigurable = false;

  int subtractor_pairs() const;
};

// Tile partitioning for one layer: dense X x Y (or the im2col-unrolled conv
// matrix) split over ceil(rows/R) x ceil(cols_phys/C) blocks, padded with
// g_off. Fractional layers split into a unipolar and a bipolar column group.
std::vector<Tile> partition_layer(const NetworkGraph& net, int layer_index, int tile_rows,
                                  int tile_cols, const DeviceModel& dev,
                                  std::vector<ColumnGroup>* groups_out);

// Expected tile count from the partition formulas (ceil arithmetic).
int64_t expected_tile_count(int rows, int out_cols, int uni_cols, int tile_rows, int tile_cols);

// Builds the full deployment: hardens the activation search, projects the
// parameters onto the quantization grids, partitions every trainable layer
// and freezes programming noise. `seed` only feeds the noise draw.
CrossbarDeployment build_deployment(const NetworkGraph& trained, int tile_rows, int tile_cols,
                                    const DeviceModel& dev, QuantScheme scheme, uint64_t seed = 1);

// Full analog-path inference: DAC encode -> tile MACs -> digital block sums
// -> ADC decode (activation + output-range quantization) per layer.
Tensor crossbar_infer(const CrossbarDeployment& dep, const Tensor& x);

// Mandatory ideal-device check: with noise 0 and a sufficient conductance
// grid, crossbar_infer must equal the digital quantized forward elementwise.
// Returns the number of mismatched elements (0 = pass).
int64_t verify_deployment(const CrossbarDeployment& dep, const Tensor& probe);

// Deployment manifest (JSON): tiles, schemes, DAC/ADC configs, verdict.
std::string deployment_manifest(const CrossbarDeployment& dep);
void save_manifest(const CrossbarDeployment& dep, const std::string& path);

}  // namespace xbt
