#pragma once

#include <functional>
#include <vector>

#include "core/quant.hpp"
#include "core/tensor.hpp"

namespace xbt {

class Tape;

// Handle to a node on a tape. Cheap to copy; owns nothing.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Padding { valid, same };

// im2col gather: row p of the result is the receptive field feeding output
// position p, elements ordered (ki, kj, c) to match a [kh*kw*C, F] reshape of
// the kernel. The crossbar mapper feeds tiles through this same function, so
// digital and analog paths see identical unrolling.
Tensor im2col_gather(const Tensor& x, int kh, int kw, int stride, Padding pad);
void conv_output_geometry(int h, int w, int kh, int kw, int stride, Padding pad, int* oh, int* ow,
                          int* pad_top, int* pad_left);

// Reverse-mode tape over Tensor nodes. Operations append nodes in topological
// order; backward() runs one reverse sweep, accumulating (summing) into the
// gradients of fan-out nodes.
class Tape {
public:
  Value leaf(Tensor t, bool requires_grad = false);

  // ---- linear algebra ----
  Value matmul(Value a, Value b);
  Value conv2d(Value x, Value k, int stride, Padding pad);
  Value maxpool2x2(Value x);
  Value reshape(Value x, Shape shape);

  // ---- elementwise ----
  // Broadcasts: identical shapes, one scalar operand, or rank-1 bias against
  // the last axis. Anything else is a dimension error.
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value relu(Value a);  // max0; subgradient at 0 is 0
  Value tanh_op(Value a);
  Value scale(Value a, double c);

  // ---- reductions / loss ----
  Value sum(Value a);
  Value mean(Value a);
  Value index_scalar(Value a, int64_t idx);  // one element as a scalar node
  Value softmax_vec(Value a);  // softmax over a rank-1 tensor
  Value softmax_cross_entropy(Value logits, const std::vector<int>& labels);

  // ---- quantization nodes ----
  // Fixed-grid fake quantization with the straight-through backward rule.
  Value fake_quant(Value t, const QuantGrid& grid);
  // Range endpoints as differentiable scalars; their gradients are the exact
  // local derivatives of the quantizer output (valid away from level jumps).
  Value fake_quant(Value t, Value range_min, Value range_max, int bits);
  // alpha*q(t) + (1-alpha)*t with the blended backward rule.
  Value alpha_blend_quant(Value t, const QuantGrid& grid, double alpha);
  Value alpha_blend_quant(Value t, Value range_min, Value range_max, int bits, double alpha);

  void backward(Value loss);

  const Tensor& value(Value v) const;
  Tensor& value_mut(Value v);
  const std::vector<double>& grad(Value v);
  LayerStats stats(Value v) const;

  size_t node_count() const { return nodes_.size(); }

private:
  struct Node {
    Tensor val;
    std::function<void(Tape&, Node&)> back;
    bool requires_grad = false;
  };

  Node& node(Value v);
  const Node& node(Value v) const;
  Value push(Tensor val, bool requires_grad, std::function<void(Tape&, Node&)> back);
  std::vector<double>* grad_of(int id);  // nullptr when that node does not need gradients

  std::vector<Node> nodes_;
};

}  // namespace xbt
