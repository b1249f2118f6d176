#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace oracle {

std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double dn = f(x);
    x[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double max_rel_err(const std::vector<double>& got, const std::vector<double>& want,
                   double denom_floor) {
  double worst = 0.0;
  for (size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max(std::abs(want[i]), denom_floor);
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

namespace {

// Self-contained uniform-grid quantizer (zero-point nudging, ties to even).
double q(double t, double lo, double hi, int bits) {
  const int n1 = (1 << bits) - 1;
  const double s = (hi - lo) / n1;
  double z = std::nearbyint(-lo / s);
  z = std::min(std::max(z, 0.0), static_cast<double>(n1));
  const double nmin = -(z * s);
  const double nmax = nmin + n1 * s;
  const double c = std::min(std::max(t, nmin), nmax);
  const double k = std::nearbyint((c - nmin) / s);
  return nmin + k * s;
}

}  // namespace

std::vector<double> scalar_quantized_forward(const std::vector<ScalarDenseLayer>& layers,
                                             const ScalarQuantSpec& spec,
                                             const std::vector<double>& input) {
  std::vector<double> cur = input;
  for (size_t li = 0; li < layers.size(); ++li) {
    const ScalarDenseLayer& l = layers[li];
    const bool hidden = l.hidden;
    const double xmin = hidden ? spec.x_min : spec.out_x_min;
    const double xmax = hidden ? spec.x_max : spec.out_x_max;
    const double wmin = hidden ? spec.w_min : spec.out_w_min;
    const double wmax = hidden ? spec.w_max : spec.out_w_max;
    const double bmin = hidden ? spec.b_min : spec.out_b_min;
    const double bmax = hidden ? spec.b_max : spec.out_b_max;

    std::vector<double> next(l.b.size(), 0.0);
    for (size_t j = 0; j < next.size(); ++j) {
      double acc = 0.0;
      for (size_t i = 0; i < cur.size(); ++i) {
        const double xq = q(cur[i], xmin, xmax, spec.x_bits);
        const double wq = q(l.w[i][j], wmin, wmax, spec.w_bits);
        acc += xq * wq;
      }
      acc += q(l.b[j], bmin, bmax, spec.b_bits);
      if (hidden) {
        double a = spec.relu_act ? std::max(acc, 0.0) : std::tanh(acc - spec.th);
        next[j] = q(a, spec.y_min, spec.y_max, spec.y_bits);
      } else {
        next[j] = q(acc, spec.out_y_min, spec.out_y_max, spec.y_bits);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

int64_t enumerate_macs(const xbt::NetworkGraph& net) {
  const auto geom = xbt::network_geometry(net);
  int64_t macs = 0;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    if (!l.trainable()) continue;
    if (l.kind == xbt::LayerKind::conv2d) {
      const int positions = geom[li].positions;
      for (int p = 0; p < positions; ++p)
        for (int f = 0; f < l.out_dim; ++f)
          for (int ky = 0; ky < l.kh; ++ky)
            for (int kx = 0; kx < l.kw; ++kx)
              for (int c = 0; c < l.in_dim; ++c) ++macs;
    } else {
      for (int j = 0; j < l.out_dim; ++j)
        for (int i = 0; i < l.in_dim; ++i) ++macs;
    }
  }
  return macs;
}

int64_t enumerate_inputs(const xbt::NetworkGraph& net) {
  const auto geom = xbt::network_geometry(net);
  int64_t n = 0;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    if (!l.trainable()) continue;
    n += xbt::shape_numel(geom[li].in);
  }
  return n;
}

int64_t enumerate_outputs(const xbt::NetworkGraph& net) {
  const auto geom = xbt::network_geometry(net);
  int64_t n = 0;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    if (!l.trainable()) continue;
    n += xbt::shape_numel(geom[li].out);
  }
  return n;
}

int64_t enumerate_tiles(int rows, int cols, int uni_cols, int tile_rows, int tile_cols) {
  std::set<std::tuple<int, int, int>> blocks;  // (group, row block, col block)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int rb = r / tile_rows;
      if (c < uni_cols) {
        blocks.insert({0, rb, c / tile_cols});
      } else {
        // Bipolar columns occupy a physical pair.
        const int pair_index = c - uni_cols;
        blocks.insert({1, rb, (2 * pair_index) / tile_cols});
      }
    }
  }
  return static_cast<int64_t>(blocks.size());
}

double centroid_accuracy(const xbt::Dataset& ds) {
  const int64_t dim = ds.samples.size() / ds.size();
  std::map<int, std::vector<double>> centroid;
  std::map<int, int> count;
  for (int i : ds.train_idx) {
    auto& c = centroid[ds.labels[static_cast<size_t>(i)]];
    if (c.empty()) c.assign(static_cast<size_t>(dim), 0.0);
    for (int64_t k = 0; k < dim; ++k) c[static_cast<size_t>(k)] += ds.samples[dim * i + k];
    count[ds.labels[static_cast<size_t>(i)]]++;
  }
  for (auto& [lab, c] : centroid)
    for (double& v : c) v /= count[lab];
  const auto& eval = ds.val_idx.empty() ? ds.train_idx : ds.val_idx;
  int hit = 0;
  for (int i : eval) {
    int best = -1;
    double bestd = 0.0;
    for (const auto& [lab, c] : centroid) {
      double d = 0.0;
      for (int64_t k = 0; k < dim; ++k) {
        const double diff = ds.samples[dim * i + k] - c[static_cast<size_t>(k)];
        d += diff * diff;
      }
      if (best < 0 || d < bestd) {
        best = lab;
        bestd = d;
      }
    }
    if (best == ds.labels[static_cast<size_t>(i)]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(eval.size());
}

}  // namespace oracle
