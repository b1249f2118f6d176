#include "core/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "core/train.hpp"
#include "json.hpp"

namespace xbt {

using nlohmann::json;

void DeviceModel::validate() const {
  require(g_off >= 0.0 && g_off < g_on, ErrorCode::argument, "need 0 <= g_off < g_on");
  require(conductance_bits == 0 || (conductance_bits >= 2 && conductance_bits <= 8),
          ErrorCode::argument, "conductance_bits must be 0 (continuous) or in [2,8]");
  require(noise_sigma >= 0.0, ErrorCode::argument, "noise_sigma must be non-negative");
}

ConductanceMap calibrate_conductance(const QuantGrid& w_grid, const DeviceModel& dev) {
  dev.validate();
  ConductanceMap m;
  m.w_step = w_grid.scale;
  m.magnitude_cap = std::max(w_grid.zero_point, w_grid.levels - 1 - w_grid.zero_point);
  m.g_off = dev.g_off;
  m.g_on = dev.g_on;
  const double span = dev.g_on - dev.g_off;
  if (dev.conductance_bits == 0) {
    m.level_stride = 0;
    m.g_step = 0.0;
    m.gain = span / (m.magnitude_cap * m.w_step);
    return m;
  }
  const int device_levels = (1 << dev.conductance_bits) - 1;
  m.g_step = span / static_cast<double>(device_levels);
  m.level_stride = device_levels / m.magnitude_cap;  // 0 when the device is too coarse
  if (m.level_stride >= 1) {
    m.gain = (m.level_stride * m.g_step) / m.w_step;
  } else {
    m.gain = span / (m.magnitude_cap * m.w_step);
  }
  return m;
}

double ConductanceMap::conductance_for_magnitude(double w_mag) const {
  require(w_mag >= 0.0, ErrorCode::mapping, "magnitude must be non-negative");
  const double m_real = w_mag / w_step;
  require(m_real <= magnitude_cap + 0.5, ErrorCode::mapping,
          "weight magnitude outside the calibrated grid");
  if (g_step == 0.0) {
    return g_off + (w_mag / (magnitude_cap * w_step)) * (g_on - g_off);
  }
  if (level_stride >= 1) {
    const double m = round_ties_even(m_real);
    return g_off + (m * level_stride) * g_step;
  }
  // Coarse device: nearest available level.
  const double ideal = g_off + (w_mag / (magnitude_cap * w_step)) * (g_on - g_off);
  double lvl = round_ties_even((ideal - g_off) / g_step);
  lvl = std::clamp(lvl, 0.0, (g_on - g_off) / g_step);
  return g_off + lvl * g_step;
}

double weight_to_conductance(double w, const QuantGrid& w_grid, const DeviceModel& dev) {
  require(w >= 0.0, ErrorCode::mapping, "unipolar mapping needs w >= 0, got " + std::to_string(w));
  return calibrate_conductance(w_grid, dev).conductance_for_magnitude(w);
}

std::pair<double, double> weight_to_conductance_bipolar(double w, const QuantGrid& w_grid,
                                                        const DeviceModel& dev) {
  const ConductanceMap m = calibrate_conductance(w_grid, dev);
  if (w >= 0.0) return {m.conductance_for_magnitude(w), dev.g_off};
  return {dev.g_off, m.conductance_for_magnitude(-w)};
}

double dac_encode(double x, const DacConfig& dac) {
  const QuantGrid g = make_grid(dac.x.min, dac.x.max, dac.bits);
  const double xq = quantize_value(x, g);
  return (xq - g.nudged_min) * (dac.v_max / (g.nudged_max - g.nudged_min));
}

std::vector<double> tile_mac(const Tile& tile, const std::vector<double>& v) {
  require(static_cast<int>(v.size()) == tile.rows, ErrorCode::dimension,
          "voltage vector length does not match tile rows");
  std::vector<double> phys(static_cast<size_t>(tile.cols), 0.0);
  for (int r = 0; r < tile.rows; ++r) {
    const double vv = v[static_cast<size_t>(r)];
    if (vv == 0.0) continue;
    const double* row = tile.g.data() + static_cast<int64_t>(r) * tile.cols;
    for (int c = 0; c < tile.cols; ++c) phys[static_cast<size_t>(c)] += vv * row[c];
  }
  const int lc = tile.logical_cols;
  std::vector<double> out(static_cast<size_t>(lc), 0.0);
  for (int j = 0; j < lc; ++j) {
    double i = tile.scheme == ColumnScheme::bipolar_paired
                   ? phys[static_cast<size_t>(2 * j)] - phys[static_cast<size_t>(2 * j + 1)]
                   : phys[static_cast<size_t>(j)];
    if (!tile.bias_current.empty()) i += tile.bias_current[static_cast<size_t>(j)];
    out[static_cast<size_t>(j)] = i;
  }
  return out;
}

int64_t expected_tile_count(int rows, int out_cols, int uni_cols, int tile_rows, int tile_cols) {
  require(tile_rows > 0 && tile_cols > 0, ErrorCode::argument, "tile shape must be positive");
  const int64_t row_blocks = (rows + tile_rows - 1) / tile_rows;
  int64_t blocks = 0;
  if (uni_cols > 0) blocks += (uni_cols + tile_cols - 1) / tile_cols;
  const int bip = out_cols - uni_cols;
  if (bip > 0) blocks += (2 * bip + tile_cols - 1) / tile_cols;
  return row_blocks * blocks;
}

int CrossbarDeployment::subtractor_pairs() const {
  int n = 0;
  for (const auto& t : tiles)
    if (t.scheme == ColumnScheme::bipolar_paired) n += t.logical_cols;
  return n;
}

namespace {

struct LayerQuantContext {
  QuantGrid wg;
  QuantGrid bg;
  bool quantize_bias = true;
  Range x_range, y_range;
  int x_bits = 4, y_bits = 4;
};

LayerQuantContext layer_context(const NetworkGraph& net, size_t li, QuantScheme scheme) {
  const LayerSpec& l = net.layers[li];
  LayerQuantContext ctx;
  const bool is_out = l.binding == QuantBinding::output;
  if (is_out) {
    ctx.wg = make_grid(net.output_set.w);
    ctx.bg = make_grid(net.output_set.b);
    ctx.x_range = net.output_set.x;
    ctx.x_bits = net.output_set.x.bits;
    ctx.y_range = net.output_set.y;
    ctx.y_bits = net.output_set.y.bits;
  } else if (scheme == QuantScheme::per_layer) {
    ctx.wg = make_grid(net.layer_ranges[li].w);
    ctx.quantize_bias = false;
    ctx.bg = ctx.wg;  // unused
    ctx.x_range = net.layer_ranges[li].x;
    ctx.x_bits = net.layer_ranges[li].x.bits;
    // The following activation layer owns the y range.
    ctx.y_range = net.globals.y;
    ctx.y_bits = net.globals.y.bits;
    for (size_t j = li + 1; j < net.layers.size(); ++j) {
      if (net.layers[j].kind == LayerKind::activation) {
        ctx.y_range = net.layer_ranges[j].y;
        ctx.y_bits = net.layer_ranges[j].y.bits;
        break;
      }
      if (net.layers[j].trainable()) break;
    }
  } else {
    ctx.wg = make_grid(net.globals.w);
    ctx.bg = make_grid(net.globals.b);
    ctx.x_range = net.globals.x;
    ctx.x_bits = net.globals.x.bits;
    ctx.y_range = net.globals.y;
    ctx.y_bits = net.globals.y.bits;
  }
  return ctx;
}

}  // namespace

std::vector<Tile> partition_layer(const NetworkGraph& net, int layer_index, int tile_rows,
                                  int tile_cols, const DeviceModel& dev,
                                  std::vector<ColumnGroup>* groups_out) {
  require(tile_rows > 0 && tile_cols > 0, ErrorCode::argument, "tile shape must be positive");
  require(tile_cols % 2 == 0, ErrorCode::argument, "bipolar pairing needs an even tile width");
  const LayerSpec& l = net.layers[static_cast<size_t>(layer_index)];
  require(l.trainable(), ErrorCode::argument, "cannot partition a routing layer");
  const Tensor& w = net.params.at(l.name + ".w");
  const LayerQuantContext ctx = layer_context(
      net, static_cast<size_t>(layer_index),
      QuantScheme::global_shared);  // callers needing per-layer grids go through build_deployment
  const ConductanceMap cmap = calibrate_conductance(ctx.wg, dev);

  const int rows = (l.kind == LayerKind::conv2d) ? l.kh * l.kw * l.in_dim : l.in_dim;
  const int cols = l.out_dim;
  const int uni = l.polarity.unipolar_channels(cols);

  std::vector<Tile> tiles;
  std::vector<ColumnGroup> groups;
  auto emit_group = [&](int begin, int count, ColumnScheme scheme) {
    if (count <= 0) return;
    ColumnGroup grp;
    grp.col_begin = begin;
    grp.col_count = count;
    grp.scheme = scheme;
    const int cap = scheme == ColumnScheme::bipolar_paired ? tile_cols / 2 : tile_cols;
    grp.row_blocks = (rows + tile_rows - 1) / tile_rows;
    grp.col_blocks = (count + cap - 1) / cap;
    for (int rb = 0; rb < grp.row_blocks; ++rb) {
      for (int cb = 0; cb < grp.col_blocks; ++cb) {
        Tile t;
        t.rows = tile_rows;
        t.cols = tile_cols;
        t.scheme = scheme;
        t.layer_index = layer_index;
        t.row_block = rb;
        t.col_block = cb;
        t.active_rows = std::min(tile_rows, rows - rb * tile_rows);
        t.logical_cols = std::min(cap, count - cb * cap);
        t.g.assign(static_cast<size_t>(tile_rows) * tile_cols, dev.g_off);
        for (int r = 0; r < t.active_rows; ++r) {
          const int gr = rb * tile_rows + r;
          for (int j = 0; j < t.logical_cols; ++j) {
            const int gc = begin + cb * cap + j;
            const double wv = w[static_cast<int64_t>(gr) * cols + gc];
            if (scheme == ColumnScheme::unipolar) {
              require(wv >= 0.0, ErrorCode::mapping,
                      "negative weight in unipolar column of layer " + l.name);
              t.g[static_cast<size_t>(r) * tile_cols + j] = cmap.conductance_for_magnitude(wv);
            } else {
              const double mag = cmap.conductance_for_magnitude(std::abs(wv));
              t.g[static_cast<size_t>(r) * tile_cols + 2 * j] = wv >= 0.0 ? mag : dev.g_off;
              t.g[static_cast<size_t>(r) * tile_cols + 2 * j + 1] = wv >= 0.0 ? dev.g_off : mag;
            }
          }
        }
        grp.tile_ids.push_back(static_cast<int>(tiles.size()));
        tiles.push_back(std::move(t));
      }
    }
    groups.push_back(std::move(grp));
  };
  emit_group(0, uni, ColumnScheme::unipolar);
  emit_group(uni, cols - uni, ColumnScheme::bipolar_paired);
  if (groups_out) *groups_out = groups;
  return tiles;
}

CrossbarDeployment build_deployment(const NetworkGraph& trained, int tile_rows, int tile_cols,
                                    const DeviceModel& dev, QuantScheme scheme, uint64_t seed) {
  require(scheme != QuantScheme::none, ErrorCode::deployment,
          "deployment requires a quantized network");
  dev.validate();
  require(tile_rows > 0 && tile_cols > 0 && tile_cols % 2 == 0, ErrorCode::argument,
          "bad tile shape");

  CrossbarDeployment dep;
  dep.tile_rows = tile_rows;
  dep.tile_cols = tile_cols;
  dep.device = dev;
  dep.scheme = scheme;
  dep.net = trained;
  // Harden the activation search and project every parameter onto its grid.
  if (dep.net.act_mode == ActMode::search_mix) {
    dep.net.fixed_act = select_activation(dep.net.globals.a_logits);
    dep.net.act_mode = ActMode::fixed;
  }
  dep.net.globals.do_q = 1;
  dep.net.globals.alpha = 1.0;
  project_parameters(dep.net, scheme);

  const std::vector<LayerGeometry> geom = network_geometry(dep.net);

  for (size_t li = 0; li < dep.net.layers.size(); ++li) {
    const LayerSpec& l = dep.net.layers[li];
    if (!l.trainable()) continue;
    const bool is_out = l.binding == QuantBinding::output;
    const LayerQuantContext ctx = layer_context(dep.net, li, scheme);
    LayerDeployment ld;
    ld.layer_index = static_cast<int>(li);
    ld.kind = l.kind;
    ld.kh = l.kh;
    ld.kw = l.kw;
    ld.stride = l.stride;
    ld.pad = l.pad;
    ld.unrolled_rows = (l.kind == LayerKind::conv2d) ? l.kh * l.kw * l.in_dim : l.in_dim;
    ld.out_cols = l.out_dim;
    ld.dac.x = ctx.x_range;
    ld.dac.bits = ctx.x_bits;
    ld.dac.v_max = 1.0;
    ld.adc.y = ctx.y_range;
    ld.adc.bits = ctx.y_bits;
    ld.adc.apply_activation = !is_out;
    ld.adc.act = dep.net.fixed_act;
    ld.adc.th = dep.net.globals.th;
    ld.cmap = calibrate_conductance(ctx.wg, dev);
    ld.input_batches =
        (static_cast<int>(shape_numel(geom[li].in)) + tile_rows - 1) / tile_rows;

    // Tiles for this layer. Per-layer grids need their own partition pass.
    const Tensor& w = dep.net.params.at(l.name + ".w");
    const Tensor& b = dep.net.params.at(l.name + ".b");
    const int rows = ld.unrolled_rows;
    const int cols = ld.out_cols;
    const int uni = l.polarity.unipolar_channels(cols);

    ld.colsum.assign(static_cast<size_t>(cols), 0.0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        ld.colsum[static_cast<size_t>(c)] += w[static_cast<int64_t>(r) * cols + c];

    const QuantGrid xg = make_grid(ld.dac.x.min, ld.dac.x.max, ld.dac.bits);
    const double gv = ld.dac.v_max / (xg.nudged_max - xg.nudged_min);

    auto emit_group = [&](int begin, int count, ColumnScheme cscheme) {
      if (count <= 0) return;
      ColumnGroup grp;
      grp.col_begin = begin;
      grp.col_count = count;
      grp.scheme = cscheme;
      const int cap = cscheme == ColumnScheme::bipolar_paired ? tile_cols / 2 : tile_cols;
      grp.row_blocks = (rows + tile_rows - 1) / tile_rows;
      grp.col_blocks = (count + cap - 1) / cap;
      for (int rb = 0; rb < grp.row_blocks; ++rb)
        for (int cb = 0; cb < grp.col_blocks; ++cb) {
          Tile t;
          t.rows = tile_rows;
          t.cols = tile_cols;
          t.scheme = cscheme;
          t.layer_index = static_cast<int>(li);
          t.row_block = rb;
          t.col_block = cb;
          t.active_rows = std::min(tile_rows, rows - rb * tile_rows);
          t.logical_cols = std::min(cap, count - cb * cap);
          t.g.assign(static_cast<size_t>(tile_rows) * tile_cols, dev.g_off);
          for (int r = 0; r < t.active_rows; ++r) {
            const int gr = rb * tile_rows + r;
            for (int j = 0; j < t.logical_cols; ++j) {
              const int gc = begin + cb * cap + j;
              const double wv = w[static_cast<int64_t>(gr) * cols + gc];
              if (cscheme == ColumnScheme::unipolar) {
                require(wv >= 0.0, ErrorCode::mapping,
                        "negative weight in unipolar column of layer " + l.name);
                t.g[static_cast<size_t>(r) * tile_cols + j] =
                    ld.cmap.conductance_for_magnitude(wv);
              } else {
                const double mag = ld.cmap.conductance_for_magnitude(std::abs(wv));
                t.g[static_cast<size_t>(r) * tile_cols + 2 * j] = wv >= 0.0 ? mag : dev.g_off;
                t.g[static_cast<size_t>(r) * tile_cols + 2 * j + 1] = wv >= 0.0 ? dev.g_off : mag;
              }
            }
          }
          if (rb == 0) {
            t.bias_current.assign(static_cast<size_t>(t.logical_cols), 0.0);
            for (int j = 0; j < t.logical_cols; ++j) {
              const int gc = begin + cb * cap + j;
              double bq = b[gc];
              if (ctx.quantize_bias) bq = quantize_value(bq, ctx.bg);
              t.bias_current[static_cast<size_t>(j)] = bq * gv * ld.cmap.gain;
            }
          }
          grp.tile_ids.push_back(static_cast<int>(dep.tiles.size()));
          dep.tiles.push_back(std::move(t));
        }
      ld.groups.push_back(std::move(grp));
    };
    emit_group(0, uni, ColumnScheme::unipolar);
    emit_group(uni, cols - uni, ColumnScheme::bipolar_paired);
    dep.layers.push_back(std::move(ld));
  }

  // Programming noise, frozen once per deployment.
  if (dev.noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Tile& t : dep.tiles)
      for (double& g : t.g) {
        g *= 1.0 + dev.noise_sigma * gauss(rng);
        g = std::clamp(g, dev.g_off, dev.g_on);
      }
  }

  // Reconfigurable iff all hidden layers share one DAC and one ADC design.
  dep.reconfigurable = true;
  const LayerDeployment* ref = nullptr;
  for (const auto& ld : dep.layers) {
    if (dep.net.layers[static_cast<size_t>(ld.layer_index)].binding == QuantBinding::output)
      continue;
    if (!ref) {
      ref = &ld;
      continue;
    }
    const bool same_dac = ld.dac.bits == ref->dac.bits && ld.dac.x.min == ref->dac.x.min &&
                          ld.dac.x.max == ref->dac.x.max;
    const bool same_adc = ld.adc.bits == ref->adc.bits && ld.adc.y.min == ref->adc.y.min &&
                          ld.adc.y.max == ref->adc.y.max && ld.adc.act == ref->adc.act &&
                          ld.adc.th == ref->adc.th;
    if (!same_dac || !same_adc) dep.reconfigurable = false;
  }
  return dep;
}

namespace {

Tensor eval_maxpool(const Tensor& x) {
  Tape tape;
  return tape.value(tape.maxpool2x2(tape.leaf(x)));
}

// MAC + decode for one trainable layer over an input matrix whose rows are
// the (already gathered) input vectors.
Tensor layer_analog_matmul(const CrossbarDeployment& dep, const LayerDeployment& ld,
                           const Tensor& inmat) {
  const int p = inmat.dim(0);
  const int rows = ld.unrolled_rows;
  require(inmat.dim(1) == rows, ErrorCode::deployment, "input width does not match layer rows");
  const int cols = ld.out_cols;

  const QuantGrid xg = make_grid(ld.dac.x.min, ld.dac.x.max, ld.dac.bits);
  const double gv = ld.dac.v_max / (xg.nudged_max - xg.nudged_min);
  const QuantGrid yg = make_grid(ld.adc.y.min, ld.adc.y.max, ld.adc.bits);

  // DAC stage: encode every input element once.
  Tensor vmat({p, rows});
  std::vector<double> vsum(static_cast<size_t>(p), 0.0);
  for (int i = 0; i < p; ++i) {
    const double* in = inmat.data() + static_cast<int64_t>(i) * rows;
    double* v = vmat.data() + static_cast<int64_t>(i) * rows;
    double s = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double xq = quantize_value(in[r], xg);
      v[r] = (xq - xg.nudged_min) * gv;
      s += v[r];
    }
    vsum[static_cast<size_t>(i)] = s;
  }

  Tensor current({p, cols});
  std::vector<char> is_unipolar(static_cast<size_t>(cols), 0);
  for (const ColumnGroup& grp : ld.groups) {
    for (int j = 0; j < grp.col_count; ++j)
      is_unipolar[static_cast<size_t>(grp.col_begin + j)] =
          grp.scheme == ColumnScheme::unipolar ? 1 : 0;
    const int cap = grp.scheme == ColumnScheme::bipolar_paired ? dep.tile_cols / 2 : dep.tile_cols;
    for (int tid : grp.tile_ids) {
      const Tile& t = dep.tiles[static_cast<size_t>(tid)];
      const int row0 = t.row_block * dep.tile_rows;
      const int col0 = grp.col_begin + t.col_block * cap;
      std::vector<double> v(static_cast<size_t>(t.rows), 0.0);
      for (int i = 0; i < p; ++i) {
        const double* vr = vmat.data() + static_cast<int64_t>(i) * rows;
        for (int r = 0; r < t.rows; ++r)
          v[static_cast<size_t>(r)] = (row0 + r < rows && r < t.active_rows) ? vr[row0 + r] : 0.0;
        const std::vector<double> i_col = tile_mac(t, v);
        double* crow = current.data() + static_cast<int64_t>(i) * cols;
        for (int j = 0; j < t.logical_cols; ++j) crow[col0 + j] += i_col[static_cast<size_t>(j)];
      }
    }
  }

  // ADC stage: invert the calibration, activate, quantize onto the Y grid.
  Tensor out({p, cols});
  const double inv_slope = 1.0 / (gv * ld.cmap.gain);
  for (int i = 0; i < p; ++i) {
    const double* crow = current.data() + static_cast<int64_t>(i) * cols;
    double* orow = out.data() + static_cast<int64_t>(i) * cols;
    for (int c = 0; c < cols; ++c) {
      double cur = crow[c];
      if (is_unipolar[static_cast<size_t>(c)] && dep.device.g_off != 0.0)
        cur -= dep.device.g_off * vsum[static_cast<size_t>(i)];
      double pre = cur * inv_slope + xg.nudged_min * ld.colsum[static_cast<size_t>(c)];
      if (ld.adc.apply_activation) {
        pre = ld.adc.act == ActivationKind::relu ? (pre > 0.0 ? pre : 0.0)
                                                 : std::tanh(pre - ld.adc.th);
      }
      orow[c] = quantize_value(pre, yg);
    }
  }
  return out;
}

}  // namespace

Tensor crossbar_infer(const CrossbarDeployment& dep, const Tensor& x) {
  {
    Shape got(x.shape().begin() + 1, x.shape().end());
    require(got == dep.net.input_shape, ErrorCode::deployment,
            "input shape does not match the deployed network");
  }
  const int batch = x.dim(0);
  Tensor cur = x;
  size_t next_ld = 0;
  for (size_t li = 0; li < dep.net.layers.size(); ++li) {
    const LayerSpec& l = dep.net.layers[li];
    switch (l.kind) {
      case LayerKind::flatten:
        cur = cur.reshaped(Shape{batch, static_cast<int>(cur.size() / batch)});
        break;
      case LayerKind::maxpool:
        cur = eval_maxpool(cur);
        break;
      case LayerKind::activation:
        // Applied by the preceding layer's ADC.
        break;
      case LayerKind::conv2d:
      case LayerKind::dense:
      case LayerKind::output: {
        require(next_ld < dep.layers.size() &&
                    dep.layers[next_ld].layer_index == static_cast<int>(li),
                ErrorCode::deployment, "deployment/net layer mismatch");
        const LayerDeployment& ld = dep.layers[next_ld++];
        if (l.kind == LayerKind::conv2d) {
          int oh, ow, pt, pl;
          conv_output_geometry(cur.dim(1), cur.dim(2), l.kh, l.kw, l.stride, l.pad, &oh, &ow, &pt,
                               &pl);
          Tensor inmat = im2col_gather(cur, l.kh, l.kw, l.stride, l.pad);
          Tensor outmat = layer_analog_matmul(dep, ld, inmat);
          cur = outmat.reshaped(Shape{batch, oh, ow, l.out_dim});
        } else {
          cur = layer_analog_matmul(dep, ld, cur);
        }
        break;
      }
    }
  }
  return cur;
}

int64_t verify_deployment(const CrossbarDeployment& dep, const Tensor& probe) {
  // Ideal twin: continuous noiseless device, same net, same tiling.
  DeviceModel ideal = dep.device;
  ideal.noise_sigma = 0.0;
  ideal.conductance_bits = 0;
  NetworkGraph net_copy = dep.net;
  CrossbarDeployment twin =
      build_deployment(net_copy, dep.tile_rows, dep.tile_cols, ideal, dep.scheme, 0);
  Tensor analog = crossbar_infer(twin, probe);
  Tensor digital = forward_infer(twin.net, probe, dep.scheme);
  require(analog.shape() == digital.shape(), ErrorCode::deployment,
          "verification shape mismatch");
  int64_t bad = 0;
  for (int64_t i = 0; i < analog.size(); ++i)
    if (analog[i] != digital[i]) ++bad;
  return bad;
}

std::string deployment_manifest(const CrossbarDeployment& dep) {
  json j;
  j["format"] = "xbt-deployment-v1";
  j["tile_shape"] = {dep.tile_rows, dep.tile_cols};
  j["device"] = {{"g_off", dep.device.g_off},
                 {"g_on", dep.device.g_on},
                 {"conductance_bits", dep.device.conductance_bits},
                 {"noise_sigma", dep.device.noise_sigma}};
  j["reconfigurable"] = dep.reconfigurable;
  json layers = json::array();
  for (const auto& ld : dep.layers) {
    const LayerSpec& l = dep.net.layers[static_cast<size_t>(ld.layer_index)];
    json lj;
    lj["layer"] = l.name;
    lj["kind"] = to_string(l.kind);
    lj["rows"] = ld.unrolled_rows;
    lj["cols"] = ld.out_cols;
    lj["input_batches"] = ld.input_batches;
    lj["dac"] = {{"bits", ld.dac.bits}, {"min", ld.dac.x.min}, {"max", ld.dac.x.max}};
    lj["adc"] = {{"bits", ld.adc.bits},
                 {"min", ld.adc.y.min},
                 {"max", ld.adc.y.max},
                 {"activation", ld.adc.apply_activation ? to_string(ld.adc.act) : "none"},
                 {"th", ld.adc.th}};
    json groups = json::array();
    for (const auto& g : ld.groups)
      groups.push_back(json{{"col_begin", g.col_begin},
                            {"col_count", g.col_count},
                            {"scheme", g.scheme == ColumnScheme::unipolar ? "unipolar" : "bipolar_paired"},
                            {"row_blocks", g.row_blocks},
                            {"col_blocks", g.col_blocks},
                            {"tiles", g.tile_ids}});
    lj["groups"] = groups;
    layers.push_back(lj);
  }
  j["layers"] = layers;
  json tiles = json::array();
  for (const auto& t : dep.tiles)
    tiles.push_back(json{{"layer", t.layer_index},
                         {"row_block", t.row_block},
                         {"col_block", t.col_block},
                         {"scheme", t.scheme == ColumnScheme::unipolar ? "unipolar" : "bipolar_paired"},
                         {"active_rows", t.active_rows},
                         {"logical_cols", t.logical_cols}});
  j["tiles"] = tiles;
  j["counts"] = {{"crossbars", dep.tiles.size()},
                 {"dac_bank", dep.tile_rows},
                 {"adc_bank", dep.tile_cols},
                 {"subtractor_pairs", dep.subtractor_pairs()}};
  return j.dump(1);
}

void save_manifest(const CrossbarDeployment& dep, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f << deployment_manifest(dep);
  require(f.good(), ErrorCode::io, "write failed for " + path);
}

}  // namespace xbt
