#include "core/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace xbt {

using nlohmann::json;

int Polarity::unipolar_channels(int channels) const {
  switch (mode) {
    case PolarityMode::bipolar: return 0;
    case PolarityMode::unipolar: return channels;
    case PolarityMode::fractional:
      return static_cast<int>(round_ties_even(fraction * channels));
  }
  return 0;
}

int64_t LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::conv2d:
      return static_cast<int64_t>(kh) * kw * in_dim * out_dim + out_dim;
    case LayerKind::dense:
    case LayerKind::output:
      return static_cast<int64_t>(in_dim) * out_dim + out_dim;
    default:
      return 0;
  }
}

int64_t NetworkGraph::param_count() const {
  int64_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

std::vector<std::string> NetworkGraph::trainable_layer_names() const {
  std::vector<std::string> out;
  for (const auto& l : layers)
    if (l.trainable()) out.push_back(l.name);
  return out;
}

std::vector<bool> NetworkGraph::polarity_mask(const LayerSpec& layer) const {
  const auto it = params.find(layer.name + ".w");
  require(it != params.end(), ErrorCode::internal, "missing weights for " + layer.name);
  const Tensor& w = it->second;
  std::vector<bool> mask(static_cast<size_t>(w.size()), false);
  const int channels = layer.out_dim;
  const int uni = layer.polarity.unipolar_channels(channels);
  if (uni == 0) return mask;
  // Output channels are the last axis for both [kh,kw,C,F] and [X,Y] layouts;
  // the first `uni` channels are the constrained ones (index-deterministic).
  for (int64_t i = 0; i < w.size(); ++i)
    if (static_cast<int>(i % channels) < uni) mask[static_cast<size_t>(i)] = true;
  return mask;
}

void NetworkGraph::validate() const {
  require(num_classes >= 2, ErrorCode::argument, "network needs at least two classes");
  int out_bound = 0;
  const LayerSpec* last_trainable = nullptr;
  for (const auto& l : layers) {
    if (l.trainable()) last_trainable = &l;
    if (l.trainable() && l.binding == QuantBinding::output) ++out_bound;
    if (l.kind == LayerKind::conv2d)
      require(l.kh > 0 && l.kw > 0 && l.in_dim > 0 && l.out_dim > 0, ErrorCode::argument,
              "conv layer " + l.name + " has unresolved shape");
    if (l.kind == LayerKind::dense || l.kind == LayerKind::output)
      require(l.in_dim > 0 && l.out_dim > 0, ErrorCode::argument,
              "dense layer " + l.name + " has unresolved shape");
    if (l.polarity.mode == PolarityMode::fractional)
      require(l.polarity.fraction >= 0.0 && l.polarity.fraction <= 1.0, ErrorCode::argument,
              "unipolar fraction must lie in [0,1]");
  }
  require(last_trainable != nullptr, ErrorCode::argument, "network has no trainable layers");
  require(out_bound == 1 && last_trainable->binding == QuantBinding::output, ErrorCode::argument,
          "exactly the last trainable layer must bind to the output set");
  globals.validate();
  output_set.validate();
  for (const auto& l : layers) {
    if (!l.trainable()) continue;
    require(params.count(l.name + ".w") == 1 && params.count(l.name + ".b") == 1,
            ErrorCode::argument, "parameters for layer " + l.name + " not registered exactly once");
  }
}

namespace {

void init_params(NetworkGraph& net, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& l : net.layers) {
    if (!l.trainable()) continue;
    int64_t fan_in = (l.kind == LayerKind::conv2d) ? static_cast<int64_t>(l.kh) * l.kw * l.in_dim
                                                   : l.in_dim;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Shape wshape = (l.kind == LayerKind::conv2d) ? Shape{l.kh, l.kw, l.in_dim, l.out_dim}
                                                 : Shape{l.in_dim, l.out_dim};
    Tensor w(wshape);
    for (int64_t i = 0; i < w.size(); ++i) w[i] = dist(rng);
    net.params[l.name + ".w"] = std::move(w);
    net.params[l.name + ".b"] = Tensor(Shape{l.out_dim});
  }
}

void finalize(NetworkGraph& net, uint64_t seed) {
  // Last trainable layer owns the output binding.
  LayerSpec* last = nullptr;
  for (auto& l : net.layers)
    if (l.trainable()) last = &l;
  require(last != nullptr, ErrorCode::argument, "network has no trainable layers");
  for (auto& l : net.layers) l.binding = QuantBinding::global;
  last->binding = QuantBinding::output;
  last->kind = LayerKind::output;
  net.layer_ranges.assign(net.layers.size(), LayerRanges{});
  init_params(net, seed);
  net.validate();
}

}  // namespace

NetworkGraph build_dense_net(int input_dim, const std::vector<int>& hidden, int classes,
                             uint64_t seed) {
  NetworkGraph net;
  net.input_shape = {input_dim};
  net.num_classes = classes;
  int cur = input_dim;
  int idx = 1;
  for (int hsize : hidden) {
    LayerSpec d;
    d.kind = LayerKind::dense;
    d.name = "dense" + std::to_string(idx++);
    d.in_dim = cur;
    d.out_dim = hsize;
    net.layers.push_back(d);
    LayerSpec a;
    a.kind = LayerKind::activation;
    a.name = d.name + ".act";
    net.layers.push_back(a);
    cur = hsize;
  }
  LayerSpec o;
  o.kind = LayerKind::output;
  o.name = "out";
  o.in_dim = cur;
  o.out_dim = classes;
  net.layers.push_back(o);
  finalize(net, seed);
  return net;
}

NetworkGraph build_har_like(int hidden, uint64_t seed) {
  NetworkGraph net;
  net.input_shape = {9, 100};
  net.num_classes = 12;
  LayerSpec f;
  f.kind = LayerKind::flatten;
  f.name = "flatten";
  net.layers.push_back(f);
  LayerSpec d;
  d.kind = LayerKind::dense;
  d.name = "dense1";
  d.in_dim = 900;
  d.out_dim = hidden;
  net.layers.push_back(d);
  LayerSpec a;
  a.kind = LayerKind::activation;
  a.name = "dense1.act";
  net.layers.push_back(a);
  LayerSpec o;
  o.kind = LayerKind::output;
  o.name = "out";
  o.in_dim = hidden;
  o.out_dim = 12;
  net.layers.push_back(o);
  finalize(net, seed);
  return net;
}

NetworkGraph build_cifar_cnn(uint64_t seed) {
  NetworkGraph net;
  net.input_shape = {32, 32, 3};
  net.num_classes = 10;
  struct ConvDef {
    int in, out;
  };
  const ConvDef convs[4] = {{3, 16}, {16, 32}, {32, 48}, {48, 64}};
  int idx = 0;
  for (int stage = 0; stage < 2; ++stage) {
    for (int i = 0; i < 2; ++i) {
      const ConvDef& cd = convs[idx];
      LayerSpec c;
      c.kind = LayerKind::conv2d;
      c.name = "conv" + std::to_string(idx + 1);
      c.kh = c.kw = 3;
      c.stride = 1;
      c.pad = Padding::same;
      c.in_dim = cd.in;
      c.out_dim = cd.out;
      net.layers.push_back(c);
      LayerSpec a;
      a.kind = LayerKind::activation;
      a.name = c.name + ".act";
      net.layers.push_back(a);
      ++idx;
    }
    LayerSpec p;
    p.kind = LayerKind::maxpool;
    p.name = "pool" + std::to_string(stage + 1);
    net.layers.push_back(p);
  }
  LayerSpec fl;
  fl.kind = LayerKind::flatten;
  fl.name = "flatten";
  net.layers.push_back(fl);
  LayerSpec d;
  d.kind = LayerKind::dense;
  d.name = "dense1";
  d.in_dim = 8 * 8 * 64;
  d.out_dim = 64;
  net.layers.push_back(d);
  LayerSpec a;
  a.kind = LayerKind::activation;
  a.name = "dense1.act";
  net.layers.push_back(a);
  LayerSpec o;
  o.kind = LayerKind::output;
  o.name = "out";
  o.in_dim = 64;
  o.out_dim = 10;
  net.layers.push_back(o);
  finalize(net, seed);
  return net;
}

NetworkGraph build_reference(const std::string& name, uint64_t seed) {
  if (name == "har") return build_har_like(145, seed);
  if (name == "cifar10") return build_cifar_cnn(seed);
  raise(ErrorCode::argument, "unknown reference network '" + name + "'");
}

namespace {

struct QuantNodes {
  // Inserts the quant node for tensor `v` on `grid_range`, honoring trainable
  // leaves when provided.
  static Value range_quant(Tape& tape, Value v, const Range& r, const RangeLeaves& leaves,
                           double alpha, bool blend) {
    if (leaves.active) {
      if (blend) return tape.alpha_blend_quant(v, leaves.lo, leaves.hi, r.bits, alpha);
      return tape.fake_quant(v, leaves.lo, leaves.hi, r.bits);
    }
    const QuantGrid g = make_grid(r);
    if (blend) return tape.alpha_blend_quant(v, g, alpha);
    return tape.fake_quant(v, g);
  }
};

}  // namespace

ForwardBuild build_forward(Tape& tape, NetworkGraph& net, const Tensor& x,
                           const ForwardOptions& opts) {
  require(x.rank() >= 1, ErrorCode::dimension, "empty input");
  {
    // Input must match the declared shape (batch is the leading axis).
    Shape expect = net.input_shape;
    Shape got(x.shape().begin() + 1, x.shape().end());
    require(got == expect, ErrorCode::dimension,
            "input shape " + shape_str(x.shape()) + " does not match network input " +
                shape_str(expect));
  }
  const int batch = x.dim(0);
  const bool quant = opts.scheme != QuantScheme::none && net.globals.do_q == 1;
  const double alpha = opts.alpha_override.value_or(net.globals.alpha);
  const bool grads = opts.build_grads;

  ForwardBuild fb;
  Value cur = tape.leaf(x, false);

  // Activation-search leaves are shared by every hidden activation layer.
  const bool mix = net.act_mode == ActMode::search_mix;
  fb.search_leaves = mix;
  fb.a_logits = tape.leaf(Tensor({2}, {net.globals.a_logits[0], net.globals.a_logits[1]}), grads);
  fb.th = tape.leaf(Tensor::scalar(net.globals.th), grads);

  const bool gradient_ranges = quant && opts.scheme == QuantScheme::global_shared;
  auto mk_leaves = [&](const Range& r) {
    RangeLeaves lv;
    if (gradient_ranges && r.trainable) {
      lv.lo = tape.leaf(Tensor::scalar(r.min), grads);
      lv.hi = tape.leaf(Tensor::scalar(r.max), grads);
      lv.active = true;
    }
    return lv;
  };
  fb.rx = mk_leaves(net.globals.x);
  fb.ry = mk_leaves(net.globals.y);
  fb.rw = mk_leaves(net.globals.w);
  fb.rb = mk_leaves(net.globals.b);

  Value a_soft = tape.softmax_vec(fb.a_logits);
  Value a0 = tape.index_scalar(a_soft, 0);
  Value a1 = tape.index_scalar(a_soft, 1);

  for (size_t li = 0; li < net.layers.size(); ++li) {
    LayerSpec& layer = net.layers[li];
    switch (layer.kind) {
      case LayerKind::flatten: {
        const Tensor& v = tape.value(cur);
        cur = tape.reshape(cur, Shape{batch, static_cast<int>(v.size() / batch)});
        break;
      }
      case LayerKind::maxpool:
        cur = tape.maxpool2x2(cur);
        break;
      case LayerKind::activation: {
        LayerTap tap;
        tap.layer_index = static_cast<int>(li);
        Value pre = cur;
        Value act;
        if (mix) {
          Value r = tape.relu(pre);
          Value s = tape.tanh_op(tape.sub(pre, fb.th));
          act = tape.add(tape.mul(r, a0), tape.mul(s, a1));
        } else if (net.fixed_act == ActivationKind::relu) {
          act = tape.relu(pre);
        } else {
          act = tape.tanh_op(tape.sub(pre, fb.th));
        }
        tap.y = tape.stats(act);
        if (quant) {
          const Range& yr = opts.scheme == QuantScheme::per_layer ? net.layer_ranges[li].y
                                                                  : net.globals.y;
          act = QuantNodes::range_quant(tape, act, yr,
                                        opts.scheme == QuantScheme::per_layer ? RangeLeaves{} : fb.ry,
                                        alpha, false);
        }
        fb.taps.push_back(tap);
        cur = act;
        break;
      }
      case LayerKind::conv2d:
      case LayerKind::dense:
      case LayerKind::output: {
        const bool is_out = layer.binding == QuantBinding::output;
        LayerTap tap;
        tap.layer_index = static_cast<int>(li);
        tap.x = tape.stats(cur);

        Value in = cur;
        Tensor& wt = net.params[layer.name + ".w"];
        Tensor& bt = net.params[layer.name + ".b"];
        Value w = tape.leaf(wt, grads);
        Value b = tape.leaf(bt, grads);
        fb.param_leaves[layer.name + ".w"] = w;
        fb.param_leaves[layer.name + ".b"] = b;
        tap.w = tape.stats(w);
        tap.b = tape.stats(b);

        if (quant) {
          const bool per_layer = opts.scheme == QuantScheme::per_layer;
          const GlobalVariableSet& set = is_out ? net.output_set : net.globals;
          const Range& xr = per_layer && !is_out ? net.layer_ranges[li].x : set.x;
          const Range& wr = per_layer && !is_out ? net.layer_ranges[li].w : set.w;
          const RangeLeaves no_leaves;
          const RangeLeaves& xl = (!per_layer && !is_out) ? fb.rx : no_leaves;
          const RangeLeaves& wl = (!per_layer && !is_out) ? fb.rw : no_leaves;
          in = QuantNodes::range_quant(tape, in, xr, xl, alpha, false);
          w = QuantNodes::range_quant(tape, w, wr, wl, alpha, true);
          // The per-layer baseline does not quantize biases.
          if (!per_layer || is_out) {
            const Range& br = set.b;
            const RangeLeaves& bl = (!per_layer && !is_out) ? fb.rb : no_leaves;
            b = QuantNodes::range_quant(tape, b, br, bl, alpha, false);
          }
        }

        Value pre;
        if (layer.kind == LayerKind::conv2d) {
          pre = tape.conv2d(in, w, layer.stride, layer.pad);
        } else {
          pre = tape.matmul(in, w);
        }
        pre = tape.add(pre, b);

        if (is_out) {
          tap.y = tape.stats(pre);
          // Output layer digitizes its pre-activations on its own set.
          if (quant) pre = tape.fake_quant(pre, make_grid(net.output_set.y));
        }
        fb.taps.push_back(tap);
        cur = pre;
        break;
      }
    }
  }
  fb.logits = cur;
  return fb;
}

Tensor forward_infer(NetworkGraph& net, const Tensor& x, QuantScheme scheme) {
  Tape tape;
  ForwardOptions opts;
  opts.scheme = scheme;
  opts.build_grads = false;
  opts.alpha_override = 1.0;
  ForwardBuild fb = build_forward(tape, net, x, opts);
  return tape.value(fb.logits);
}

void project_parameters(NetworkGraph& net, QuantScheme scheme) {
  if (scheme == QuantScheme::none) return;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& layer = net.layers[li];
    if (!layer.trainable()) continue;
    const bool is_out = layer.binding == QuantBinding::output;
    const bool per_layer = scheme == QuantScheme::per_layer && !is_out;
    const Range& wr = per_layer ? net.layer_ranges[li].w : (is_out ? net.output_set.w : net.globals.w);
    const QuantGrid wg = make_grid(wr);
    Tensor& w = net.params[layer.name + ".w"];
    const std::vector<bool> mask = net.polarity_mask(layer);
    for (int64_t i = 0; i < w.size(); ++i) {
      double v = w[i];
      if (mask[static_cast<size_t>(i)] && v < 0.0) v = 0.0;
      w[i] = quantize_value(v, wg);
    }
    if (!per_layer) {
      const Range& br = is_out ? net.output_set.b : net.globals.b;
      const QuantGrid bg = make_grid(br);
      Tensor& b = net.params[layer.name + ".b"];
      for (int64_t i = 0; i < b.size(); ++i) b[i] = quantize_value(b[i], bg);
    }
  }
}

std::vector<double> distinct_hidden_weights(const NetworkGraph& net, QuantScheme scheme) {
  std::set<double> values;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& layer = net.layers[li];
    if (!layer.trainable() || layer.binding == QuantBinding::output) continue;
    const Range& wr = scheme == QuantScheme::per_layer ? net.layer_ranges[li].w : net.globals.w;
    const QuantGrid wg = make_grid(wr);
    const Tensor& w = net.params.at(layer.name + ".w");
    for (int64_t i = 0; i < w.size(); ++i) values.insert(quantize_value(w[i], wg));
  }
  return std::vector<double>(values.begin(), values.end());
}

std::vector<LayerGeometry> network_geometry(const NetworkGraph& net) {
  std::vector<LayerGeometry> out;
  Shape cur = net.input_shape;
  for (const auto& l : net.layers) {
    LayerGeometry g;
    g.in = cur;
    switch (l.kind) {
      case LayerKind::flatten:
        cur = Shape{static_cast<int>(shape_numel(cur))};
        break;
      case LayerKind::maxpool:
        require(cur.size() == 3, ErrorCode::dimension, "maxpool needs HWC input");
        cur = Shape{cur[0] / 2, cur[1] / 2, cur[2]};
        break;
      case LayerKind::activation:
        break;
      case LayerKind::conv2d: {
        require(cur.size() == 3, ErrorCode::dimension, "conv needs HWC input");
        require(cur[2] == l.in_dim, ErrorCode::dimension,
                "channel mismatch entering " + l.name);
        int oh, ow, pt, pl;
        conv_output_geometry(cur[0], cur[1], l.kh, l.kw, l.stride, l.pad, &oh, &ow, &pt, &pl);
        g.positions = oh * ow;
        cur = Shape{oh, ow, l.out_dim};
        break;
      }
      case LayerKind::dense:
      case LayerKind::output: {
        require(cur.size() == 1 && cur[0] == l.in_dim, ErrorCode::dimension,
                "shape mismatch entering " + l.name + ": expected [" + std::to_string(l.in_dim) +
                    "], got " + shape_str(cur));
        cur = Shape{l.out_dim};
        break;
      }
    }
    g.out = cur;
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network description file (JSON)

namespace {

json range_to_json(const Range& r) {
  return json{{"min", r.min}, {"max", r.max}, {"bits", r.bits}, {"trainable", r.trainable}};
}

Range range_from_json(const json& j) {
  Range r;
  r.min = j.at("min").get<double>();
  r.max = j.at("max").get<double>();
  r.bits = j.at("bits").get<int>();
  r.trainable = j.value("trainable", false);
  return r;
}

json set_to_json(const GlobalVariableSet& s) {
  return json{{"x", range_to_json(s.x)},
              {"y", range_to_json(s.y)},
              {"w", range_to_json(s.w)},
              {"b", range_to_json(s.b)},
              {"a_logits", {s.a_logits[0], s.a_logits[1]}},
              {"th", s.th},
              {"do_q", s.do_q},
              {"alpha", s.alpha},
              {"unipolar_w", s.unipolar_w}};
}

GlobalVariableSet set_from_json(const json& j) {
  GlobalVariableSet s;
  s.x = range_from_json(j.at("x"));
  s.y = range_from_json(j.at("y"));
  s.w = range_from_json(j.at("w"));
  s.b = range_from_json(j.at("b"));
  s.a_logits[0] = j.at("a_logits")[0].get<double>();
  s.a_logits[1] = j.at("a_logits")[1].get<double>();
  s.th = j.at("th").get<double>();
  s.do_q = j.at("do_q").get<int>();
  s.alpha = j.at("alpha").get<double>();
  s.unipolar_w = j.value("unipolar_w", false);
  return s;
}

json layer_to_json(const LayerSpec& l) {
  json j;
  j["kind"] = to_string(l.kind);
  j["name"] = l.name;
  if (l.kind == LayerKind::conv2d) {
    j["kernel"] = {l.kh, l.kw};
    j["stride"] = l.stride;
    j["padding"] = l.pad == Padding::same ? "same" : "valid";
  }
  if (l.trainable()) {
    j["in"] = l.in_dim;
    j["out"] = l.out_dim;
    j["binding"] = l.binding == QuantBinding::output ? "output" : "global";
    json p;
    p["mode"] = to_string(l.polarity.mode);
    if (l.polarity.mode == PolarityMode::fractional) p["fraction"] = l.polarity.fraction;
    j["polarity"] = p;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv2d") l.kind = LayerKind::conv2d;
  else if (kind == "dense") l.kind = LayerKind::dense;
  else if (kind == "maxpool") l.kind = LayerKind::maxpool;
  else if (kind == "flatten") l.kind = LayerKind::flatten;
  else if (kind == "activation") l.kind = LayerKind::activation;
  else if (kind == "output") l.kind = LayerKind::output;
  else raise(ErrorCode::format, "unknown layer kind '" + kind + "'");
  l.name = j.at("name").get<std::string>();
  if (l.kind == LayerKind::conv2d) {
    l.kh = j.at("kernel")[0].get<int>();
    l.kw = j.at("kernel")[1].get<int>();
    l.stride = j.at("stride").get<int>();
    l.pad = j.at("padding").get<std::string>() == "same" ? Padding::same : Padding::valid;
  }
  if (l.trainable()) {
    l.in_dim = j.at("in").get<int>();
    l.out_dim = j.at("out").get<int>();
    l.binding = j.at("binding").get<std::string>() == "output" ? QuantBinding::output
                                                               : QuantBinding::global;
    const json& p = j.at("polarity");
    const std::string mode = p.at("mode").get<std::string>();
    if (mode == "bipolar") l.polarity.mode = PolarityMode::bipolar;
    else if (mode == "unipolar") l.polarity.mode = PolarityMode::unipolar;
    else if (mode == "fractional") {
      l.polarity.mode = PolarityMode::fractional;
      l.polarity.fraction = p.at("fraction").get<double>();
    } else {
      raise(ErrorCode::format, "unknown polarity mode '" + mode + "'");
    }
  }
  return l;
}

}  // namespace

std::string network_to_json(const NetworkGraph& net) {
  json j;
  j["format"] = "xbt-network-v1";
  j["input_shape"] = net.input_shape;
  j["classes"] = net.num_classes;
  j["activation"] = {{"mode", net.act_mode == ActMode::search_mix ? "search" : "fixed"},
                     {"kind", to_string(net.fixed_act)}};
  j["globals"] = set_to_json(net.globals);
  j["output_set"] = set_to_json(net.output_set);
  json layers = json::array();
  for (const auto& l : net.layers) layers.push_back(layer_to_json(l));
  j["layers"] = layers;
  json ranges = json::array();
  for (const auto& r : net.layer_ranges)
    ranges.push_back(json{{"x", range_to_json(r.x)}, {"w", range_to_json(r.w)}, {"y", range_to_json(r.y)}});
  j["layer_ranges"] = ranges;
  json params;
  for (const auto& [name, t] : net.params)
    params[name] = json{{"shape", t.shape()}, {"data", t.vec()}};
  j["params"] = params;
  return j.dump(1);
}

NetworkGraph network_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorCode::format, std::string("network file is not valid JSON: ") + e.what());
  }
  require(j.value("format", "") == "xbt-network-v1", ErrorCode::format,
          "unsupported network file format");
  NetworkGraph net;
  net.input_shape = j.at("input_shape").get<Shape>();
  net.num_classes = j.at("classes").get<int>();
  net.act_mode = j.at("activation").at("mode").get<std::string>() == "search" ? ActMode::search_mix
                                                                              : ActMode::fixed;
  const auto kind = activation_from_string(j.at("activation").at("kind").get<std::string>());
  require(kind.has_value(), ErrorCode::format, "unknown activation kind");
  net.fixed_act = *kind;
  net.globals = set_from_json(j.at("globals"));
  net.output_set = set_from_json(j.at("output_set"));
  for (const auto& lj : j.at("layers")) net.layers.push_back(layer_from_json(lj));
  for (const auto& rj : j.at("layer_ranges")) {
    LayerRanges r;
    r.x = range_from_json(rj.at("x"));
    r.w = range_from_json(rj.at("w"));
    r.y = range_from_json(rj.at("y"));
    net.layer_ranges.push_back(r);
  }
  if (net.layer_ranges.empty()) net.layer_ranges.assign(net.layers.size(), LayerRanges{});
  for (const auto& [name, pj] : j.at("params").items()) {
    net.params[name] = Tensor(pj.at("shape").get<Shape>(), pj.at("data").get<std::vector<double>>());
  }
  net.validate();
  return net;
}

void save_network(const NetworkGraph& net, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f << network_to_json(net);
  require(f.good(), ErrorCode::io, "write failed for " + path);
}

NetworkGraph load_network(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return network_from_json(ss.str());
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::activation: return "activation";
    case LayerKind::output: return "output";
  }
  return "?";
}

std::string to_string(PolarityMode m) {
  switch (m) {
    case PolarityMode::bipolar: return "bipolar";
    case PolarityMode::unipolar: return "unipolar";
    case PolarityMode::fractional: return "fractional";
  }
  return "?";
}

}  // namespace xbt
