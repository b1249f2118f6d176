#include "core/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace xbt {

void LossConfig::validate() const {
  require(l1_coeff >= 0.0 && l2_coeff >= 0.0 && constraint.alpha_c >= 0.0, ErrorCode::argument,
          "loss coefficients must be non-negative");
}

double constraint_gate(const ConstraintConfig& cfg, int step) {
  const double d = static_cast<double>(step - cfg.start_step);
  if (cfg.ramp == ConstraintRamp::heaviside) return d >= 0.0 ? 1.0 : 0.0;
  return d > 0.0 ? d : 0.0;
}

Value constraint_loss(Tape& tape, const std::vector<Value>& weights,
                      const std::vector<std::vector<bool>>& masks, const ConstraintConfig& cfg,
                      int step) {
  require(weights.size() == masks.size(), ErrorCode::argument,
          "constraint_loss: one mask per weight tensor required");
  const double gate = constraint_gate(cfg, step);
  Value acc = tape.leaf(Tensor::scalar(0.0));
  if (gate == 0.0 || cfg.alpha_c == 0.0) return acc;
  Value wt = tape.leaf(Tensor::scalar(cfg.w_t));
  for (size_t i = 0; i < weights.size(); ++i) {
    const std::vector<bool>& m = masks[i];
    bool any = false;
    for (bool b : m)
      if (b) {
        any = true;
        break;
      }
    if (!any) continue;
    Tensor mask_t(tape.value(weights[i]).shape());
    for (int64_t j = 0; j < mask_t.size(); ++j) mask_t[j] = m[static_cast<size_t>(j)] ? 1.0 : 0.0;
    Value mask = tape.leaf(std::move(mask_t));
    Value below = tape.relu(tape.sub(wt, weights[i]));  // max(W_T - w, 0)
    acc = tape.add(acc, tape.sum(tape.mul(below, mask)));
  }
  return tape.scale(acc, cfg.alpha_c * gate);
}

LossBuild total_loss(Tape& tape, Value task_loss, const std::vector<Value>& weights,
                     const std::vector<std::vector<bool>>& masks, const LossConfig& cfg, int step) {
  cfg.validate();
  LossBuild lb;
  lb.task = tape.value(task_loss).item();
  Value total = task_loss;
  if (cfg.l2_coeff > 0.0) {
    Value l2 = tape.leaf(Tensor::scalar(0.0));
    for (const Value& w : weights) l2 = tape.add(l2, tape.sum(tape.mul(w, w)));
    l2 = tape.scale(l2, cfg.l2_coeff);
    lb.l2 = tape.value(l2).item();
    total = tape.add(total, l2);
  }
  if (cfg.l1_coeff > 0.0) {
    Value zero = tape.leaf(Tensor::scalar(0.0));
    Value l1 = tape.leaf(Tensor::scalar(0.0));
    for (const Value& w : weights) {
      Value absw = tape.add(tape.relu(w), tape.relu(tape.sub(zero, w)));
      l1 = tape.add(l1, tape.sum(absw));
    }
    l1 = tape.scale(l1, cfg.l1_coeff);
    lb.l1 = tape.value(l1).item();
    total = tape.add(total, l1);
  }
  Value lc = constraint_loss(tape, weights, masks, cfg.constraint, step);
  lb.constraint = tape.value(lc).item();
  total = tape.add(total, lc);
  lb.total = total;
  return lb;
}

Value activation_mix(Tape& tape, Value x, Value a_logits, Value th) {
  Value soft = tape.softmax_vec(a_logits);
  Value a0 = tape.index_scalar(soft, 0);
  Value a1 = tape.index_scalar(soft, 1);
  Value r = tape.relu(x);
  Value s = tape.tanh_op(tape.sub(x, th));
  return tape.add(tape.mul(r, a0), tape.mul(s, a1));
}

ActivationKind select_activation(const double a_logits[2]) {
  return a_logits[0] >= a_logits[1] ? ActivationKind::relu : ActivationKind::shifted_tanh;
}

namespace {

// Adam (default) or plain SGD over named parameter slots.
class Optimizer {
public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  void step(const std::string& name, double* param, const double* grad, int64_t n) {
    if (kind_ == OptimizerKind::sgd) {
      for (int64_t i = 0; i < n; ++i) param[i] -= lr_ * grad[i];
      return;
    }
    Slot& s = slots_[name];
    if (s.m.empty()) {
      s.m.assign(static_cast<size_t>(n), 0.0);
      s.v.assign(static_cast<size_t>(n), 0.0);
    }
    s.t += 1;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, s.t);
    const double bc2 = 1.0 - std::pow(b2, s.t);
    for (int64_t i = 0; i < n; ++i) {
      const size_t u = static_cast<size_t>(i);
      s.m[u] = b1 * s.m[u] + (1.0 - b1) * grad[i];
      s.v[u] = b2 * s.v[u] + (1.0 - b2) * grad[i] * grad[i];
      const double mh = s.m[u] / bc1;
      const double vh = s.v[u] / bc2;
      param[i] -= lr_ * mh / (std::sqrt(vh) + eps);
    }
  }

private:
  struct Slot {
    std::vector<double> m, v;
    int t = 0;
  };
  OptimizerKind kind_;
  double lr_;
  std::map<std::string, Slot> slots_;
};

double batch_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0), k = logits.dim(1);
  int hit = 0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + static_cast<int64_t>(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    if (best == labels[static_cast<size_t>(i)]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

void check_finite(Tape& tape, const NetworkGraph& net, const ForwardBuild& fb, double loss) {
  if (std::isfinite(loss)) return;
  for (const LayerTap& tap : fb.taps) {
    const LayerSpec& l = net.layers[static_cast<size_t>(tap.layer_index)];
    for (const LayerStats* s : {&tap.x, &tap.w, &tap.b, &tap.y}) {
      if (!std::isfinite(s->mean) || !std::isfinite(s->min) || !std::isfinite(s->max)) {
        raise(ErrorCode::numeric, "non-finite loss; first offending layer: " + l.name);
      }
    }
  }
  (void)tape;
  raise(ErrorCode::numeric, "non-finite loss (all layer statistics finite; check loss terms)");
}

}  // namespace

double evaluate_accuracy(NetworkGraph& net, const Dataset& data, const std::vector<int>& idx,
                         QuantScheme scheme, int cap, int batch) {
  if (idx.empty()) return 0.0;
  const int total = cap > 0 ? std::min<int>(cap, static_cast<int>(idx.size()))
                            : static_cast<int>(idx.size());
  int hit = 0;
  for (int at = 0; at < total; at += batch) {
    const int count = std::min(batch, total - at);
    std::vector<int> lab;
    Tensor x = data.gather(idx, at, count, &lab);
    Tensor logits = forward_infer(net, x, scheme);
    const int k = logits.dim(1);
    for (int i = 0; i < count; ++i) {
      const double* row = logits.data() + static_cast<int64_t>(i) * k;
      int best = 0;
      for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
      if (best == lab[static_cast<size_t>(i)]) ++hit;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

TrainResult train(NetworkGraph& net, const Dataset& data, const Hyper& hyper,
                  const std::function<void(const StepMetrics&)>& on_step) {
  require(hyper.steps >= 0 && hyper.batch_size > 0, ErrorCode::argument, "bad step/batch config");
  require(!data.train_idx.empty(), ErrorCode::argument, "dataset has no training split");
  hyper.loss.validate();
  net.validate();

  Optimizer opt(hyper.optimizer, hyper.lr);
  std::mt19937_64 shuffle_rng(hyper.seed);
  std::vector<int> order(data.train_idx);

  // Polarity masks are fixed for the whole run (index-deterministic channels).
  std::vector<std::string> wnames;
  std::vector<std::vector<bool>> masks;
  for (const auto& l : net.layers) {
    if (!l.trainable()) continue;
    wnames.push_back(l.name + ".w");
    masks.push_back(net.polarity_mask(l));
  }

  TrainResult result;
  const int n_train = static_cast<int>(order.size());
  const int batch = std::min(hyper.batch_size, n_train);
  int cursor = n_train;  // forces a shuffle on first use

  const int alpha_end = static_cast<int>(hyper.alpha_ramp * hyper.steps);
  const int quant_start = static_cast<int>(hyper.quant_delay * hyper.steps);

  for (int step = 0; step < hyper.steps; ++step) {
    if (cursor + batch > n_train) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      cursor = 0;
    }
    std::vector<int> lab;
    Tensor x = data.gather(order, cursor, batch, &lab);
    cursor += batch;

    // Schedules advance before the forward so the logged value is the one used.
    const double alpha = alpha_end <= 0 ? 1.0
                                        : std::min(1.0, static_cast<double>(step) /
                                                            static_cast<double>(alpha_end));
    net.globals.alpha = alpha;
    net.globals.do_q = step >= quant_start ? 1 : 0;

    Tape tape;
    ForwardOptions fo;
    fo.scheme = hyper.scheme;
    fo.build_grads = true;
    ForwardBuild fb = build_forward(tape, net, x, fo);
    Value task = tape.softmax_cross_entropy(fb.logits, lab);

    std::vector<Value> wvals;
    for (const auto& name : wnames) wvals.push_back(fb.param_leaves.at(name));
    LossBuild lb = total_loss(tape, task, wvals, masks, hyper.loss, step);
    check_finite(tape, net, fb, tape.value(lb.total).item());

    tape.backward(lb.total);

    // Optimizer update: parameters first, then the trainable globals.
    for (auto& [name, leaf] : fb.param_leaves) {
      Tensor& p = net.params[name];
      opt.step(name, p.data(), tape.grad(leaf).data(), p.size());
    }
    if (fb.search_leaves) {
      double alog[2] = {net.globals.a_logits[0], net.globals.a_logits[1]};
      opt.step("globals.a", alog, tape.grad(fb.a_logits).data(), 2);
      net.globals.a_logits[0] = alog[0];
      net.globals.a_logits[1] = alog[1];
      double th = net.globals.th;
      opt.step("globals.th", &th, tape.grad(fb.th).data(), 1);
      net.globals.th = th;
    }
    auto update_range_leaf = [&](const char* name, RangeLeaves& lv, Range& r, bool pin_min) {
      if (!lv.active) return;
      double lo = r.min, hi = r.max;
      if (!pin_min) opt.step(std::string(name) + ".min", &lo, tape.grad(lv.lo).data(), 1);
      opt.step(std::string(name) + ".max", &hi, tape.grad(lv.hi).data(), 1);
      if (hi <= lo) hi = lo + 1e-6;
      r.min = lo;
      r.max = hi;
    };
    update_range_leaf("globals.x", fb.rx, net.globals.x, false);
    update_range_leaf("globals.y", fb.ry, net.globals.y, false);
    update_range_leaf("globals.w", fb.rw, net.globals.w, net.globals.unipolar_w);
    update_range_leaf("globals.b", fb.rb, net.globals.b, false);

    // Non-differentiable global variables recomputed from layer statistics.
    // The first quantized step snaps to the batch envelope so a poor initial
    // range cannot clip the whole network.
    if (hyper.range_policy == RangePolicy::ema && hyper.scheme != QuantScheme::none) {
      const double lambda = step == quant_start ? 0.0 : hyper.ema_lambda;
      std::vector<LayerStats> sx, sw, sb, sy, ox, ow, ob, oy;
      for (const LayerTap& tap : fb.taps) {
        const LayerSpec& l = net.layers[static_cast<size_t>(tap.layer_index)];
        if (l.kind == LayerKind::activation) {
          sy.push_back(tap.y);
          if (hyper.scheme == QuantScheme::per_layer) {
            LayerRanges& lr = net.layer_ranges[static_cast<size_t>(tap.layer_index)];
            update_global_range(lr.y, {tap.y}, RangePolicy::ema, lambda);
          }
        } else if (l.trainable() && l.binding == QuantBinding::output) {
          ox.push_back(tap.x);
          ow.push_back(tap.w);
          ob.push_back(tap.b);
          oy.push_back(tap.y);
        } else if (l.trainable()) {
          sx.push_back(tap.x);
          sw.push_back(tap.w);
          sb.push_back(tap.b);
          if (hyper.scheme == QuantScheme::per_layer) {
            LayerRanges& lr = net.layer_ranges[static_cast<size_t>(tap.layer_index)];
            update_global_range(lr.x, {tap.x}, RangePolicy::ema, lambda);
            update_global_range(lr.w, {tap.w}, RangePolicy::ema, lambda);
          }
        }
      }
      if (hyper.scheme == QuantScheme::global_shared) {
        if (!net.globals.x.trainable) update_global_range(net.globals.x, sx, RangePolicy::ema, lambda);
        if (!net.globals.w.trainable)
          update_global_range(net.globals.w, sw, RangePolicy::ema, lambda, net.globals.unipolar_w);
        if (!net.globals.b.trainable) update_global_range(net.globals.b, sb, RangePolicy::ema, lambda);
        if (!net.globals.y.trainable && !sy.empty())
          update_global_range(net.globals.y, sy, RangePolicy::ema, lambda);
      }
      if (!ox.empty()) {
        update_global_range(net.output_set.x, ox, RangePolicy::ema, lambda);
        update_global_range(net.output_set.w, ow, RangePolicy::ema, lambda);
        update_global_range(net.output_set.b, ob, RangePolicy::ema, lambda);
        update_global_range(net.output_set.y, oy, RangePolicy::ema, lambda);
      }
    }

    // Metrics row per step.
    StepMetrics m;
    m.step = step;
    m.task_loss = lb.task;
    m.l1 = lb.l1;
    m.l2 = lb.l2;
    m.constraint = lb.constraint;
    m.train_acc = batch_accuracy(tape.value(fb.logits), lab);
    m.alpha = alpha;
    {
      double soft0 = std::exp(net.globals.a_logits[0]);
      double soft1 = std::exp(net.globals.a_logits[1]);
      const double z = soft0 + soft1;
      m.a0 = soft0 / z;
      m.a1 = soft1 / z;
    }
    m.th = net.globals.th;
    double wmin = 0.0, wmax = 0.0;
    bool first = true;
    for (const auto& l : net.layers) {
      if (!l.trainable() || l.binding == QuantBinding::output) continue;
      const Tensor& w = net.params[l.name + ".w"];
      for (int64_t i = 0; i < w.size(); ++i) {
        if (first) {
          wmin = wmax = w[i];
          first = false;
        } else {
          wmin = std::min(wmin, w[i]);
          wmax = std::max(wmax, w[i]);
        }
      }
    }
    m.w_min = wmin;
    m.w_max = wmax;
    const bool log_now = (hyper.log_every > 0 && step % hyper.log_every == 0) ||
                         step == hyper.steps - 1;
    if (log_now) {
      m.val_acc = evaluate_accuracy(net, data, data.val_idx, hyper.scheme, hyper.eval_cap);
      result.log.push_back(m);
      if (on_step) on_step(m);
    }
  }

  result.selected = select_activation(net.globals.a_logits);
  result.final_val_acc =
      result.log.empty() ? evaluate_accuracy(net, data, data.val_idx, hyper.scheme, hyper.eval_cap)
                         : result.log.back().val_acc;
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<StepMetrics>& log) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f << "step,task_loss,l1,l2,constraint,train_acc,val_acc,w_min,w_max,alpha,a0,a1,th_g\n";
  f.precision(10);
  for (const auto& m : log) {
    f << m.step << ',' << m.task_loss << ',' << m.l1 << ',' << m.l2 << ',' << m.constraint << ','
      << m.train_acc << ',' << m.val_acc << ',' << m.w_min << ',' << m.w_max << ',' << m.alpha
      << ',' << m.a0 << ',' << m.a1 << ',' << m.th << '\n';
  }
  require(f.good(), ErrorCode::io, "write failed for " + path);
}

}  // namespace xbt
