#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/quant.hpp"
#include "core/tensor.hpp"

namespace xbt {

enum class LayerKind { conv2d, dense, maxpool, flatten, activation, output };

enum class PolarityMode { bipolar, unipolar, fractional };

struct Polarity {
  PolarityMode mode = PolarityMode::bipolar;
  double fraction = 0.0;  // fractional: share of unipolar output channels

  // Number of constrained output channels out of `channels`.
  int unipolar_channels(int channels) const;
};

enum class QuantBinding { global, output };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::string name;
  // conv2d: kernel kh x kw, in_dim = input channels, out_dim = filters.
  // dense/output: in_dim = inputs X, out_dim = units Y.
  int kh = 0, kw = 0;
  int stride = 1;
  Padding pad = Padding::valid;
  int in_dim = 0, out_dim = 0;
  QuantBinding binding = QuantBinding::global;
  Polarity polarity;

  bool trainable() const {
    return kind == LayerKind::conv2d || kind == LayerKind::dense || kind == LayerKind::output;
  }
  int64_t param_count() const;
};

enum class ActMode { search_mix, fixed };

enum class QuantScheme { none, global_shared, per_layer };

// Per-layer range set for the per-layer STE baseline. Biases stay unquantized
// in that mode, matching the reference scheme it reproduces.
struct LayerRanges {
  Range x, w, y;
};

struct NetworkGraph {
  Shape input_shape;  // without batch dimension
  int num_classes = 0;
  std::vector<LayerSpec> layers;
  std::map<std::string, Tensor> params;

  GlobalVariableSet globals;
  GlobalVariableSet output_set;
  std::vector<LayerRanges> layer_ranges;  // indexed like layers; used by per_layer scheme

  ActMode act_mode = ActMode::search_mix;
  ActivationKind fixed_act = ActivationKind::relu;

  int64_t param_count() const;
  void validate() const;
  std::vector<std::string> trainable_layer_names() const;

  // Mask over the flattened weight tensor of `layer`, true where the element
  // belongs to a unipolar-constrained output channel.
  std::vector<bool> polarity_mask(const LayerSpec& layer) const;
};

// Reference architectures plus small custom builders.
NetworkGraph build_reference(const std::string& name, uint64_t seed = 1);
NetworkGraph build_dense_net(int input_dim, const std::vector<int>& hidden, int classes,
                             uint64_t seed);
NetworkGraph build_har_like(int hidden, uint64_t seed);  // 9x100 input, 12 classes
NetworkGraph build_cifar_cnn(uint64_t seed);

struct ForwardOptions {
  QuantScheme scheme = QuantScheme::global_shared;
  bool build_grads = false;
  std::optional<double> alpha_override;  // deployment uses 1.0
};

// Scalar leaves for one trainable range pair; inactive when EMA-managed.
struct RangeLeaves {
  Value lo, hi;
  bool active = false;
};

struct LayerTap {
  int layer_index = -1;
  LayerStats x, w, b, y;
};

struct ForwardBuild {
  Value logits;
  std::map<std::string, Value> param_leaves;
  Value a_logits;  // rank-1 [2]
  Value th;        // scalar
  bool search_leaves = false;
  RangeLeaves rx, ry, rw, rb;  // hidden global set, gradient policy only
  std::vector<LayerTap> taps;
};

// Builds the forward graph on the tape. In quantized modes every hidden
// layer's input/weight/bias/activation passes through the quant nodes bound
// to the shared set (or its per-layer ranges); do_q == 0 skips the nodes
// entirely so the result equals the float path exactly.
ForwardBuild build_forward(Tape& tape, NetworkGraph& net, const Tensor& x,
                           const ForwardOptions& opts);

// Convenience: forward pass values only.
Tensor forward_infer(NetworkGraph& net, const Tensor& x, QuantScheme scheme);

// Applies the final fake-quant projection (alpha = 1) plus the unipolar clamp
// to every trainable weight/bias, in place. This is the exported network the
// crossbar mapper consumes.
void project_parameters(NetworkGraph& net, QuantScheme scheme);

// Distinct values among hidden-layer weights after projection on the given
// scheme's grids.
std::vector<double> distinct_hidden_weights(const NetworkGraph& net, QuantScheme scheme);

// Shape flow through the network (shapes exclude the batch axis).
// positions = OH*OW for conv layers, 1 elsewhere.
struct LayerGeometry {
  Shape in, out;
  int positions = 1;
};
std::vector<LayerGeometry> network_geometry(const NetworkGraph& net);

// Network description file (JSON, round-trips losslessly).
std::string network_to_json(const NetworkGraph& net);
NetworkGraph network_from_json(const std::string& text);
void save_network(const NetworkGraph& net, const std::string& path);
NetworkGraph load_network(const std::string& path);

std::string to_string(LayerKind k);
std::string to_string(PolarityMode m);

}  // namespace xbt
