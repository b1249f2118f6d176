#include "core/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace xbt {

namespace {

// Broadcast classification for binary elementwise ops. Only identical shapes,
// scalar-with-tensor and rank-1-against-last-axis are legal.
enum class BCast { same, a_scalar, b_scalar, a_row, b_row };

BCast classify(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return BCast::same;
  if (a.size() == 1) return BCast::a_scalar;
  if (b.size() == 1) return BCast::b_scalar;
  if (b.rank() == 1 && a.rank() >= 2 && b.dim(0) == a.dim(a.rank() - 1)) return BCast::b_row;
  if (a.rank() == 1 && b.rank() >= 2 && a.dim(0) == b.dim(b.rank() - 1)) return BCast::a_row;
  raise(ErrorCode::dimension,
        "incompatible shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

const Tensor& wide(BCast bc, const Tensor& a, const Tensor& b) {
  return (bc == BCast::a_scalar || bc == BCast::a_row) ? b : a;
}

}  // namespace

void conv_output_geometry(int h, int w, int kh, int kw, int stride, Padding pad, int* oh, int* ow,
                          int* pad_top, int* pad_left) {
  require(stride >= 1, ErrorCode::argument, "stride must be >= 1");
  if (pad == Padding::valid) {
    require(kh <= h && kw <= w, ErrorCode::dimension, "kernel larger than input under valid padding");
    *oh = (h - kh) / stride + 1;
    *ow = (w - kw) / stride + 1;
    *pad_top = 0;
    *pad_left = 0;
  } else {
    *oh = (h + stride - 1) / stride;
    *ow = (w + stride - 1) / stride;
    const int pad_h = std::max((*oh - 1) * stride + kh - h, 0);
    const int pad_w = std::max((*ow - 1) * stride + kw - w, 0);
    require(kh <= h + pad_h && kw <= w + pad_w, ErrorCode::dimension,
            "kernel larger than padded input");
    *pad_top = pad_h / 2;
    *pad_left = pad_w / 2;
  }
}

Tensor im2col_gather(const Tensor& x, int kh, int kw, int stride, Padding pad) {
  require(x.rank() == 4, ErrorCode::dimension, "im2col expects NHWC input, got " + shape_str(x.shape()));
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  int oh, ow, pt, pl;
  conv_output_geometry(h, w, kh, kw, stride, pad, &oh, &ow, &pt, &pl);
  const int r = kh * kw * c;
  Tensor col({n * oh * ow, r});
  double* out = col.data();
  const double* in = x.data();
  for (int ni = 0; ni < n; ++ni) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double* row = out + (static_cast<int64_t>((ni * oh + oy) * ow + ox)) * r;
        int idx = 0;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride + ky - pt;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride + kx - pl;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
              for (int ci = 0; ci < c; ++ci) row[idx++] = 0.0;
            } else {
              const double* px = in + (static_cast<int64_t>((ni * h + iy) * w + ix)) * c;
              for (int ci = 0; ci < c; ++ci) row[idx++] = px[ci];
            }
          }
        }
      }
    }
  }
  return col;
}

Tape::Node& Tape::node(Value v) {
  require(v.tape == this && v.id >= 0 && v.id < static_cast<int>(nodes_.size()), ErrorCode::internal,
          "value does not belong to this tape");
  return nodes_[static_cast<size_t>(v.id)];
}

const Tape::Node& Tape::node(Value v) const {
  require(v.tape == this && v.id >= 0 && v.id < static_cast<int>(nodes_.size()), ErrorCode::internal,
          "value does not belong to this tape");
  return nodes_[static_cast<size_t>(v.id)];
}

Value Tape::push(Tensor val, bool requires_grad, std::function<void(Tape&, Node&)> back) {
  Node n;
  n.val = std::move(val);
  n.val.requires_grad = requires_grad;
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

std::vector<double>* Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.requires_grad) return nullptr;
  return &n.val.grad();
}

Value Tape::leaf(Tensor t, bool requires_grad) {
  return push(std::move(t), requires_grad, nullptr);
}

const Tensor& Tape::value(Value v) const { return node(v).val; }
Tensor& Tape::value_mut(Value v) { return node(v).val; }

const std::vector<double>& Tape::grad(Value v) { return node(v).val.grad(); }

LayerStats Tape::stats(Value v) const {
  const Tensor& t = node(v).val;
  LayerStats s;
  if (t.size() == 0) return s;
  double lo = t[0], hi = t[0], sum = 0.0, sq = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) {
    lo = std::min(lo, t[i]);
    hi = std::max(hi, t[i]);
    sum += t[i];
  }
  const double mean = sum / static_cast<double>(t.size());
  for (int64_t i = 0; i < t.size(); ++i) sq += (t[i] - mean) * (t[i] - mean);
  s.min = lo;
  s.max = hi;
  s.mean = mean;
  s.std = std::sqrt(sq / static_cast<double>(t.size()));
  return s;
}

void Tape::backward(Value loss) {
  Node& l = node(loss);
  require(l.val.size() == 1, ErrorCode::argument, "backward expects a scalar loss");
  l.val.grad()[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back && n.val.has_grad()) n.back(*this, n);
  }
}

Value Tape::matmul(Value va, Value vb) {
  const Tensor& a = value(va);
  const Tensor& b = value(vb);
  require(a.rank() == 2 && b.rank() == 2, ErrorCode::dimension, "matmul expects rank-2 operands");
  require(a.dim(1) == b.dim(0), ErrorCode::dimension,
          "matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  {
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (int i = 0; i < m; ++i) {
      double* crow = pc + static_cast<int64_t>(i) * n;
      for (int kk = 0; kk < k; ++kk) {
        const double av = pa[static_cast<int64_t>(i) * k + kk];
        const double* brow = pb + static_cast<int64_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  const bool rg = node(va).requires_grad || node(vb).requires_grad;
  int ia = va.id, ib = vb.id;
  return push(std::move(c), rg, [ia, ib, m, k, n](Tape& t, Node& self) {
    const std::vector<double>& g = self.val.grad_ref();
    const double* pa = t.nodes_[static_cast<size_t>(ia)].val.data();
    const double* pb = t.nodes_[static_cast<size_t>(ib)].val.data();
    if (auto* da = t.grad_of(ia)) {
      for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          const double* grow = g.data() + static_cast<int64_t>(i) * n;
          const double* brow = pb + static_cast<int64_t>(kk) * n;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          (*da)[static_cast<size_t>(i) * k + kk] += acc;
        }
    }
    if (auto* db = t.grad_of(ib)) {
      for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
          const double av = pa[static_cast<int64_t>(i) * k + kk];
          const double* grow = g.data() + static_cast<int64_t>(i) * n;
          double* drow = db->data() + static_cast<int64_t>(kk) * n;
          for (int j = 0; j < n; ++j) drow[j] += av * grow[j];
        }
    }
  });
}

Value Tape::conv2d(Value vx, Value vk, int stride, Padding pad) {
  const Tensor& x = value(vx);
  const Tensor& kt = value(vk);
  require(x.rank() == 4, ErrorCode::dimension, "conv2d input must be NHWC");
  require(kt.rank() == 4, ErrorCode::dimension, "conv2d kernel must be [kh,kw,C,F]");
  require(kt.dim(2) == x.dim(3), ErrorCode::dimension, "kernel channel count does not match input");
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int kh = kt.dim(0), kw = kt.dim(1), f = kt.dim(3);
  int oh, ow, pt, pl;
  conv_output_geometry(h, w, kh, kw, stride, pad, &oh, &ow, &pt, &pl);
  const int r = kh * kw * c;
  const int p = n * oh * ow;

  Tensor col = im2col_gather(x, kh, kw, stride, pad);
  Tensor out({n, oh, ow, f});
  {
    const double* pc = col.data();
    const double* pk = kt.data();  // [kh,kw,C,F] flattens to [r, f]
    double* po = out.data();
    for (int pi = 0; pi < p; ++pi) {
      double* orow = po + static_cast<int64_t>(pi) * f;
      const double* crow = pc + static_cast<int64_t>(pi) * r;
      for (int ri = 0; ri < r; ++ri) {
        const double cv = crow[ri];
        const double* krow = pk + static_cast<int64_t>(ri) * f;
        for (int fi = 0; fi < f; ++fi) orow[fi] += cv * krow[fi];
      }
    }
  }

  const bool rg = node(vx).requires_grad || node(vk).requires_grad;
  if (!rg) return push(std::move(out), false, nullptr);

  int ix = vx.id, ik = vk.id;
  return push(std::move(out), true,
              [ix, ik, col = std::move(col), n, h, w, c, kh, kw, f, oh, ow, pt, pl, stride, r,
               p](Tape& t, Node& self) {
                const std::vector<double>& g = self.val.grad_ref();
                if (auto* dk = t.grad_of(ik)) {
                  const double* pc = col.data();
                  for (int pi = 0; pi < p; ++pi) {
                    const double* crow = pc + static_cast<int64_t>(pi) * r;
                    const double* grow = g.data() + static_cast<int64_t>(pi) * f;
                    for (int ri = 0; ri < r; ++ri) {
                      const double cv = crow[ri];
                      if (cv == 0.0) continue;
                      double* drow = dk->data() + static_cast<int64_t>(ri) * f;
                      for (int fi = 0; fi < f; ++fi) drow[fi] += cv * grow[fi];
                    }
                  }
                }
                if (auto* dx = t.grad_of(ix)) {
                  const double* pk = t.nodes_[static_cast<size_t>(ik)].val.data();
                  // dCol then scatter back through the gather pattern.
                  for (int ni = 0; ni < n; ++ni)
                    for (int oy = 0; oy < oh; ++oy)
                      for (int ox = 0; ox < ow; ++ox) {
                        const int pi = (ni * oh + oy) * ow + ox;
                        const double* grow = g.data() + static_cast<int64_t>(pi) * f;
                        int ri = 0;
                        for (int ky = 0; ky < kh; ++ky) {
                          const int iy = oy * stride + ky - pt;
                          for (int kx = 0; kx < kw; ++kx) {
                            const int ix2 = ox * stride + kx - pl;
                            if (iy < 0 || iy >= h || ix2 < 0 || ix2 >= w) {
                              ri += c;
                              continue;
                            }
                            double* dst = dx->data() + (static_cast<int64_t>((ni * h + iy) * w + ix2)) * c;
                            for (int ci = 0; ci < c; ++ci, ++ri) {
                              const double* krow = pk + static_cast<int64_t>(ri) * f;
                              double acc = 0.0;
                              for (int fi = 0; fi < f; ++fi) acc += grow[fi] * krow[fi];
                              dst[ci] += acc;
                            }
                          }
                        }
                      }
                }
              });
}

Value Tape::maxpool2x2(Value vx) {
  const Tensor& x = value(vx);
  require(x.rank() == 4, ErrorCode::dimension, "maxpool expects NHWC input");
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = h / 2, ow = w / 2;
  require(oh > 0 && ow > 0, ErrorCode::dimension, "input too small for 2x2 pooling");
  Tensor out({n, oh, ow, c});
  std::vector<int64_t> arg(static_cast<size_t>(out.size()));
  const double* in = x.data();
  double* po = out.data();
  for (int ni = 0; ni < n; ++ni)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int ci = 0; ci < c; ++ci) {
          int64_t best = -1;
          double bv = 0.0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int64_t idx = (static_cast<int64_t>((ni * h + oy * 2 + dy) * w + ox * 2 + dx)) * c + ci;
              if (best < 0 || in[idx] > bv) {
                best = idx;
                bv = in[idx];
              }
            }
          const int64_t oidx = (static_cast<int64_t>((ni * oh + oy) * ow + ox)) * c + ci;
          po[oidx] = bv;
          arg[static_cast<size_t>(oidx)] = best;
        }
  const bool rg = node(vx).requires_grad;
  int ix = vx.id;
  return push(std::move(out), rg, [ix, arg = std::move(arg)](Tape& t, Node& self) {
    if (auto* dx = t.grad_of(ix)) {
      const std::vector<double>& g = self.val.grad_ref();
      for (size_t i = 0; i < arg.size(); ++i) (*dx)[static_cast<size_t>(arg[i])] += g[i];
    }
  });
}

Value Tape::reshape(Value vx, Shape shape) {
  Tensor out = value(vx).reshaped(std::move(shape));
  const bool rg = node(vx).requires_grad;
  int ix = vx.id;
  return push(std::move(out), rg, [ix](Tape& t, Node& self) {
    if (auto* dx = t.grad_of(ix)) {
      const std::vector<double>& g = self.val.grad_ref();
      for (size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
    }
  });
}

namespace {

template <typename F>
Tensor ew_forward(BCast bc, const Tensor& a, const Tensor& b, F&& f) {
  const Tensor& w = wide(bc, a, b);
  Tensor out(w.shape());
  const int64_t n = w.size();
  const int last = w.rank() >= 1 ? w.dim(w.rank() - 1) : 1;
  for (int64_t i = 0; i < n; ++i) {
    double av, bv;
    switch (bc) {
      case BCast::same: av = a[i]; bv = b[i]; break;
      case BCast::a_scalar: av = a[0]; bv = b[i]; break;
      case BCast::b_scalar: av = a[i]; bv = b[0]; break;
      case BCast::a_row: av = a[i % last]; bv = b[i]; break;
      case BCast::b_row: av = a[i]; bv = b[i % last]; break;
      default: av = bv = 0.0; break;
    }
    out[i] = f(av, bv);
  }
  return out;
}

}  // namespace

Value Tape::add(Value va, Value vb) {
  const Tensor& a = value(va);
  const Tensor& b = value(vb);
  const BCast bc = classify(a, b);
  Tensor out = ew_forward(bc, a, b, [](double x, double y) { return x + y; });
  const bool rg = node(va).requires_grad || node(vb).requires_grad;
  int ia = va.id, ib = vb.id;
  return push(std::move(out), rg, [ia, ib, bc](Tape& t, Node& self) {
    const std::vector<double>& g = self.val.grad_ref();
    const int64_t n = self.val.size();
    const int last = self.val.rank() >= 1 ? self.val.dim(self.val.rank() - 1) : 1;
    if (auto* da = t.grad_of(ia)) {
      for (int64_t i = 0; i < n; ++i) {
        const int64_t j = (bc == BCast::a_scalar) ? 0 : (bc == BCast::a_row ? i % last : i);
        (*da)[static_cast<size_t>(j)] += g[static_cast<size_t>(i)];
      }
    }
    if (auto* db = t.grad_of(ib)) {
      for (int64_t i = 0; i < n; ++i) {
        const int64_t j = (bc == BCast::b_scalar) ? 0 : (bc == BCast::b_row ? i % last : i);
        (*db)[static_cast<size_t>(j)] += g[static_cast<size_t>(i)];
      }
    }
  });
}

Value Tape::sub(Value va, Value vb) {
  const Tensor& a = value(va);
  const Tensor& b = value(vb);
  const BCast bc = classify(a, b);
  Tensor out = ew_forward(bc, a, b, [](double x, double y) { return x - y; });
  const bool rg = node(va).requires_grad || node(vb).requires_grad;
  int ia = va.id, ib = vb.id;
  return push(std::move(out), rg, [ia, ib, bc](Tape& t, Node& self) {
    const std::vector<double>& g = self.val.grad_ref();
    const int64_t n = self.val.size();
    const int last = self.val.rank() >= 1 ? self.val.dim(self.val.rank() - 1) : 1;
    if (auto* da = t.grad_of(ia)) {
      for (int64_t i = 0; i < n; ++i) {
        const int64_t j = (bc == BCast::a_scalar) ? 0 : (bc == BCast::a_row ? i % last : i);
        (*da)[static_cast<size_t>(j)] += g[static_cast<size_t>(i)];
      }
    }
    if (auto* db = t.grad_of(ib)) {
      for (int64_t i = 0; i < n; ++i) {
        const int64_t j = (bc == BCast::b_scalar) ? 0 : (bc == BCast::b_row ? i % last : i);
        (*db)[static_cast<size_t>(j)] -= g[static_cast<size_t>(i)];
      }
    }
  });
}

Value Tape::mul(Value va, Value vb) {
  const Tensor& a = value(va);
  const Tensor& b = value(vb);
  const BCast bc = classify(a, b);
  Tensor out = ew_forward(bc, a, b, [](double x, double y) { return x * y; });
  const bool rg = node(va).requires_grad || node(vb).requires_grad;
  int ia = va.id, ib = vb.id;
  return push(std::move(out), rg, [ia, ib, bc](Tape& t, Node& self) {
    const std::vector<double>& g = self.val.grad_ref();
    const Tensor& a = t.nodes_[static_cast<size_t>(ia)].val;
    const Tensor& b = t.nodes_[static_cast<size_t>(ib)].val;
    const int64_t n = self.val.size();
    const int last = self.val.rank() >= 1 ? self.val.dim(self.val.rank() - 1) : 1;
    auto a_idx = [&](int64_t i) { return bc == BCast::a_scalar ? 0 : (bc == BCast::a_row ? i % last : i); };
    auto b_idx = [&](int64_t i) { return bc == BCast::b_scalar ? 0 : (bc == BCast::b_row ? i % last : i); };
    if (auto* da = t.grad_of(ia)) {
      for (int64_t i = 0; i < n; ++i)
        (*da)[static_cast<size_t>(a_idx(i))] += g[static_cast<size_t>(i)] * b[b_idx(i)];
    }
    if (auto* db = t.grad_of(ib)) {
      for (int64_t i = 0; i < n; ++i)
        (*db)[static_cast<size_t>(b_idx(i))] += g[static_cast<size_t>(i)] * a[a_idx(i)];
    }
  });
}

Value Tape::relu(Value va) {
  const Tensor& a = value(va);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  const bool rg = node(va).requires_grad;
  int ia = va.id;
  return push(std::move(out), rg, [ia](Tape& t, Node& self) {
    if (auto* da = t.grad_of(ia)) {
      const Tensor& a = t.nodes_[static_cast<size_t>(ia)].val;
      const std::vector<double>& g = self.val.grad_ref();
      for (int64_t i = 0; i < a.size(); ++i)
        if (a[i] > 0.0) (*da)[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    }
  });
}

Value Tape::tanh_op(Value va) {
  const Tensor& a = value(va);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  const bool rg = node(va).requires_grad;
  int ia = va.id;
  return push(std::move(out), rg, [ia](Tape& t, Node& self) {
    if (auto* da = t.grad_of(ia)) {
      const std::vector<double>& g = self.val.grad_ref();
      for (int64_t i = 0; i < self.val.size(); ++i) {
        const double y = self.val[i];
        (*da)[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * (1.0 - y * y);
      }
    }
  });
}

Value Tape::scale(Value va, double c) {
  const Tensor& a = value(va);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  const bool rg = node(va).requires_grad;
  int ia = va.id;
  return push(std::move(out), rg, [ia, c](Tape& t, Node& self) {
    if (auto* da = t.grad_of(ia)) {
      const std::vector<double>& g = self.val.grad_ref();
      for (size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * c;
    }
  });
}

Value Tape::sum(Value va) {
  const Tensor& a = value(va);
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i];
  const bool rg = node(va).requires_grad;
  int ia = va.id;
  return push(Tensor::scalar(s), rg, [ia](Tape& t, Node& self) {
    if (auto* da = t.grad_of(ia)) {
      const double g = self.val.grad_ref()[0];
      for (auto& d : *da) d += g;
    }
  });
}

Value Tape::mean(Value va) {
  const Tensor& a = value(va);
  require(a.size() > 0, ErrorCode::argument, "mean of empty tensor");
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i];
  const double inv = 1.0 / static_cast<double>(a.size());
  const bool rg = node(va).requires_grad;
  int ia = va.id;
  return push(Tensor::scalar(s * inv), rg, [ia, inv](Tape& t, Node& self) {
    if (auto* da = t.grad_of(ia)) {
      const double g = self.val.grad_ref()[0] * inv;
      for (auto& d : *da) d += g;
    }
  });
}

Value Tape::index_scalar(Value va, int64_t idx) {
  const Tensor& a = value(va);
  require(idx >= 0 && idx < a.size(), ErrorCode::argument, "index_scalar out of range");
  const bool rg = node(va).requires_grad;
  int ia = va.id;
  return push(Tensor::scalar(a[idx]), rg, [ia, idx](Tape& t, Node& self) {
    if (auto* da = t.grad_of(ia)) (*da)[static_cast<size_t>(idx)] += self.val.grad_ref()[0];
  });
}

Value Tape::softmax_vec(Value va) {
  const Tensor& a = value(va);
  require(a.rank() == 1, ErrorCode::dimension, "softmax_vec expects a rank-1 tensor");
  Tensor out(a.shape());
  double mx = a[0];
  for (int64_t i = 1; i < a.size(); ++i) mx = std::max(mx, a[i]);
  double z = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    out[i] = std::exp(a[i] - mx);
    z += out[i];
  }
  for (int64_t i = 0; i < a.size(); ++i) out[i] /= z;
  const bool rg = node(va).requires_grad;
  int ia = va.id;
  return push(std::move(out), rg, [ia](Tape& t, Node& self) {
    if (auto* da = t.grad_of(ia)) {
      const std::vector<double>& g = self.val.grad_ref();
      const Tensor& s = self.val;
      double dot = 0.0;
      for (int64_t i = 0; i < s.size(); ++i) dot += g[static_cast<size_t>(i)] * s[i];
      for (int64_t i = 0; i < s.size(); ++i)
        (*da)[static_cast<size_t>(i)] += s[i] * (g[static_cast<size_t>(i)] - dot);
    }
  });
}

Value Tape::softmax_cross_entropy(Value vl, const std::vector<int>& labels) {
  const Tensor& l = value(vl);
  require(l.rank() == 2, ErrorCode::dimension, "softmax_cross_entropy expects [N,K] logits");
  const int n = l.dim(0), k = l.dim(1);
  require(static_cast<int>(labels.size()) == n, ErrorCode::argument, "label count does not match batch");
  for (int lab : labels)
    require(lab >= 0 && lab < k, ErrorCode::argument,
            "label " + std::to_string(lab) + " out of range [0," + std::to_string(k) + ")");

  Tensor probs({n, k});
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = l.data() + static_cast<int64_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z) + mx;
    loss += logz - row[labels[static_cast<size_t>(i)]];
    for (int j = 0; j < k; ++j) probs[static_cast<int64_t>(i) * k + j] = std::exp(row[j] - logz);
  }
  loss /= static_cast<double>(n);

  const bool rg = node(vl).requires_grad;
  int il = vl.id;
  return push(Tensor::scalar(loss), rg,
              [il, probs = std::move(probs), labels, n, k](Tape& t, Node& self) {
                if (auto* dl = t.grad_of(il)) {
                  const double g = self.val.grad_ref()[0] / static_cast<double>(n);
                  for (int i = 0; i < n; ++i)
                    for (int j = 0; j < k; ++j) {
                      double v = probs[static_cast<int64_t>(i) * k + j];
                      if (j == labels[static_cast<size_t>(i)]) v -= 1.0;
                      (*dl)[static_cast<size_t>(i) * k + j] += g * v;
                    }
                }
              });
}

Value Tape::fake_quant(Value vt, const QuantGrid& grid) {
  const Tensor& x = value(vt);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = quantize_value(x[i], grid);
  const bool rg = node(vt).requires_grad;
  int it = vt.id;
  return push(std::move(out), rg, [it, grid](Tape& t, Node& self) {
    if (auto* dt = t.grad_of(it)) {
      const Tensor& x = t.nodes_[static_cast<size_t>(it)].val;
      const std::vector<double>& g = self.val.grad_ref();
      for (int64_t i = 0; i < x.size(); ++i)
        (*dt)[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * ste_mask(x[i], grid);
    }
  });
}

Value Tape::fake_quant(Value vt, Value vmin, Value vmax, int bits) {
  const QuantGrid grid = make_grid(value(vmin).item(), value(vmax).item(), bits);
  const Tensor& x = value(vt);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = quantize_value(x[i], grid);
  const bool rg = node(vt).requires_grad || node(vmin).requires_grad || node(vmax).requires_grad;
  int it = vt.id, imin = vmin.id, imax = vmax.id;
  return push(std::move(out), rg, [it, imin, imax, grid](Tape& t, Node& self) {
    const Tensor& x = t.nodes_[static_cast<size_t>(it)].val;
    const std::vector<double>& g = self.val.grad_ref();
    if (auto* dt = t.grad_of(it)) {
      for (int64_t i = 0; i < x.size(); ++i)
        (*dt)[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * ste_mask(x[i], grid);
    }
    auto* dmin = t.grad_of(imin);
    auto* dmax = t.grad_of(imax);
    if (dmin || dmax) {
      double smin = 0.0, smax = 0.0;
      for (int64_t i = 0; i < x.size(); ++i) {
        double a, b;
        quantize_range_grads(x[i], grid, &a, &b);
        smin += g[static_cast<size_t>(i)] * a;
        smax += g[static_cast<size_t>(i)] * b;
      }
      if (dmin) (*dmin)[0] += smin;
      if (dmax) (*dmax)[0] += smax;
    }
  });
}

Value Tape::alpha_blend_quant(Value vt, const QuantGrid& grid, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::argument, "alpha must be in [0,1]");
  const Tensor& x = value(vt);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i)
    out[i] = alpha * quantize_value(x[i], grid) + (1.0 - alpha) * x[i];
  const bool rg = node(vt).requires_grad;
  int it = vt.id;
  return push(std::move(out), rg, [it, grid, alpha](Tape& t, Node& self) {
    if (auto* dt = t.grad_of(it)) {
      const Tensor& x = t.nodes_[static_cast<size_t>(it)].val;
      const std::vector<double>& g = self.val.grad_ref();
      for (int64_t i = 0; i < x.size(); ++i) {
        const double m = alpha * ste_mask(x[i], grid) + (1.0 - alpha);
        (*dt)[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * m;
      }
    }
  });
}

Value Tape::alpha_blend_quant(Value vt, Value vmin, Value vmax, int bits, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::argument, "alpha must be in [0,1]");
  const QuantGrid grid = make_grid(value(vmin).item(), value(vmax).item(), bits);
  const Tensor& x = value(vt);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i)
    out[i] = alpha * quantize_value(x[i], grid) + (1.0 - alpha) * x[i];
  const bool rg = node(vt).requires_grad || node(vmin).requires_grad || node(vmax).requires_grad;
  int it = vt.id, imin = vmin.id, imax = vmax.id;
  return push(std::move(out), rg, [it, imin, imax, grid, alpha](Tape& t, Node& self) {
    const Tensor& x = t.nodes_[static_cast<size_t>(it)].val;
    const std::vector<double>& g = self.val.grad_ref();
    if (auto* dt = t.grad_of(it)) {
      for (int64_t i = 0; i < x.size(); ++i) {
        const double m = alpha * ste_mask(x[i], grid) + (1.0 - alpha);
        (*dt)[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * m;
      }
    }
    auto* dmin = t.grad_of(imin);
    auto* dmax = t.grad_of(imax);
    if (dmin || dmax) {
      double smin = 0.0, smax = 0.0;
      for (int64_t i = 0; i < x.size(); ++i) {
        double a, b;
        quantize_range_grads(x[i], grid, &a, &b);
        smin += g[static_cast<size_t>(i)] * a * alpha;
        smax += g[static_cast<size_t>(i)] * b * alpha;
      }
      if (dmin) (*dmin)[0] += smin;
      if (dmax) (*dmax)[0] += smax;
    }
  });
}

}  // namespace xbt
