#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/nn.hpp"

namespace xbt {

enum class ConstraintRamp { heaviside, relu_ramp };

struct ConstraintConfig {
  double alpha_c = 1.0;
  double w_t = 0.0;     // unipolarity threshold W_T
  int start_step = 0;   // step N gating the penalty
  ConstraintRamp ramp = ConstraintRamp::heaviside;
};

struct LossConfig {
  double l1_coeff = 0.0;
  double l2_coeff = 0.0;
  ConstraintConfig constraint;

  void validate() const;
};

enum class OptimizerKind { adam, sgd };

struct Hyper {
  double lr = 1e-3;
  int batch_size = 32;
  int steps = 1000;
  OptimizerKind optimizer = OptimizerKind::adam;
  QuantScheme scheme = QuantScheme::global_shared;
  RangePolicy range_policy = RangePolicy::ema;
  double ema_lambda = 0.99;
  double alpha_ramp = 0.6;     // alpha reaches 1 after this fraction of steps
  double quant_delay = 0.0;    // do_q stays 0 for this fraction of steps
  uint64_t seed = 1;
  LossConfig loss;
  int log_every = 25;
  int eval_cap = 512;  // at most this many validation samples per evaluation
};

// Penalty gate value for a training step: HV(step-N) or relu(step-N).
double constraint_gate(const ConstraintConfig& cfg, int step);

// Composite loss pieces built on the tape so gradients reach the weights.
struct LossBuild {
  Value total;
  double task = 0.0, l1 = 0.0, l2 = 0.0, constraint = 0.0;
};

// Unipolarity penalty: alpha_C * sum over masked weights of max(W_T - w, 0),
// times the step gate. Only weights below the threshold are penalized; that
// is the sign that drives constrained channels toward w >= 0.
Value constraint_loss(Tape& tape, const std::vector<Value>& weights,
                      const std::vector<std::vector<bool>>& masks, const ConstraintConfig& cfg,
                      int step);

// L_F = L + l2*sum(w^2) + l1*sum(|w|) + L_C.
LossBuild total_loss(Tape& tape, Value task_loss, const std::vector<Value>& weights,
                     const std::vector<std::vector<bool>>& masks, const LossConfig& cfg, int step);

// act(x) = a0*relu(x) + a1*tanh(x - th) with (a0,a1) = softmax(a_logits).
Value activation_mix(Tape& tape, Value x, Value a_logits, Value th);

// Hardens the two-branch search; exact ties prefer relu.
ActivationKind select_activation(const double a_logits[2]);

struct StepMetrics {
  int step = 0;
  double task_loss = 0.0, l1 = 0.0, l2 = 0.0, constraint = 0.0;
  double train_acc = 0.0, val_acc = 0.0;
  double w_min = 0.0, w_max = 0.0;
  double alpha = 0.0, a0 = 0.0, a1 = 0.0, th = 0.0;
};

struct TrainResult {
  std::vector<StepMetrics> log;
  double final_val_acc = 0.0;
  ActivationKind selected = ActivationKind::relu;
};

// Runs the full constrained training loop and mutates `net` in place (weights,
// global variable set, selected activation). Same seed, same result.
TrainResult train(NetworkGraph& net, const Dataset& data, const Hyper& hyper,
                  const std::function<void(const StepMetrics&)>& on_step = nullptr);

// Accuracy of the (quantized or float) forward pass over a split.
double evaluate_accuracy(NetworkGraph& net, const Dataset& data, const std::vector<int>& idx,
                         QuantScheme scheme, int cap = 0, int batch = 64);

void write_metrics_csv(const std::string& path, const std::vector<StepMetrics>& log);

}  // namespace xbt
