#include "vc/nn/tape.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace vc::nn {

namespace {
constexpr double kCeProbFloor = 1e-300;
}

Var Tape::push(Tensor value, bool needs, std::function<void(Tape&, const Tensor&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs = needs;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::param(ParameterStore& store, const std::string& name) {
  ParamEntry& e = store.entry(name);
  for (const auto& [ptr, id] : param_lookup_)
    if (ptr == &e) return Var{id};
  Var v = push(e.value, true, nullptr);
  param_binds_.emplace_back(v.id, &e);
  param_lookup_.emplace_back(&e, v.id);
  return v;
}

const Tensor& Tape::val(Var v) const { return nodes_.at(v.id).value; }

bool Tape::needs_grad(Var v) const { return nodes_.at(v.id).needs; }

Tensor& Tape::grad_buf(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || nodes_.at(loss.id).value.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar node");
  grad_buf(loss)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.needs || !n.back) continue;
    n.back(*this, n.grad);
  }
  for (auto& [id, entry] : param_binds_) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    for (std::size_t i = 0; i < n.grad.size(); ++i) entry->grad[i] += n.grad[i];
  }
}

// ---------------------------------------------------------------- elementwise

Var Tape::unary(Var a, Tensor value, std::function<double(double, double, double)> dfn) {
  bool needs = needs_grad(a);
  int aid = a.id;
  int self = static_cast<int>(nodes_.size());
  return push(std::move(value), needs, [aid, self, dfn](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(Var{aid})) return;
    Tensor& ga = tp.grad_buf(Var{aid});
    const Tensor& x = tp.val(Var{aid});
    const Tensor& y = tp.val(Var{self});
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += dfn(g[i], x[i], y[i]);
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor &x = val(a), &y = val(b);
  if (!x.same_shape(y)) throw std::invalid_argument("add: shape mismatch");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  bool needs = needs_grad(a) || needs_grad(b);
  return push(std::move(out), needs, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a)) {
      Tensor& ga = tp.grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor &x = val(a), &y = val(b);
  if (!x.same_shape(y)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  bool needs = needs_grad(a) || needs_grad(b);
  return push(std::move(out), needs, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a)) {
      Tensor& ga = tp.grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor &x = val(a), &y = val(b);
  if (!x.same_shape(y)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  bool needs = needs_grad(a) || needs_grad(b);
  return push(std::move(out), needs, [a, b](Tape& tp, const Tensor& g) {
    const Tensor &x = tp.val(a), &y = tp.val(b);
    if (tp.needs_grad(a)) {
      Tensor& ga = tp.grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Var Tape::div(Var a, Var b) {
  const Tensor &x = val(a), &y = val(b);
  if (!x.same_shape(y)) throw std::invalid_argument("div: shape mismatch");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
  bool needs = needs_grad(a) || needs_grad(b);
  int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs, [a, b, self](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.val(b);
    const Tensor& q = tp.val(Var{self});
    if (tp.needs_grad(a)) {
      Tensor& ga = tp.grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / y[i];
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * q[i] / y[i];
    }
  });
}

Var Tape::add_scalar(Var a, double c) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  return unary(a, std::move(out), [](double g, double, double) { return g; });
}

Var Tape::mul_scalar(Var a, double c) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return unary(a, std::move(out), [c](double g, double, double) { return g * c; });
}

Var Tape::neg(Var a) { return mul_scalar(a, -1.0); }

Var Tape::scale_by(Var x, Var s) {
  const Tensor& xv = val(x);
  const Tensor& sv = val(s);
  if (sv.size() != 1) throw std::invalid_argument("scale_by: gain must be a scalar");
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= sv[0];
  bool needs = needs_grad(x) || needs_grad(s);
  return push(std::move(out), needs, [x, s](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.val(x);
    const Tensor& sv = tp.val(s);
    if (tp.needs_grad(x)) {
      Tensor& gx = tp.grad_buf(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv[0];
    }
    if (tp.needs_grad(s)) {
      Tensor& gs = tp.grad_buf(s);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      gs[0] += acc;
    }
  });
}

Var Tape::abs(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
  return unary(a, std::move(out), [](double g, double x, double) {
    return x > 0.0 ? g : (x < 0.0 ? -g : 0.0);
  });
}

Var Tape::exp(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return unary(a, std::move(out), [](double g, double, double y) { return g * y; });
}

Var Tape::log(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return unary(a, std::move(out), [](double g, double x, double) { return g / x; });
}

Var Tape::sqrt(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
  return unary(a, std::move(out), [](double g, double, double y) { return 0.5 * g / y; });
}

Var Tape::square(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
  return unary(a, std::move(out), [](double g, double x, double) { return 2.0 * g * x; });
}

Var Tape::tanh(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return unary(a, std::move(out), [](double g, double, double y) { return g * (1.0 - y * y); });
}

Var Tape::sigmoid(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return unary(a, std::move(out), [](double g, double, double y) { return g * y * (1.0 - y); });
}

Var Tape::leaky_relu(Var a, double slope) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  return unary(a, std::move(out),
               [slope](double g, double x, double) { return x > 0.0 ? g : g * slope; });
}

Var Tape::clamp_min(Var a, double lo) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], lo);
  return unary(a, std::move(out),
               [lo](double g, double x, double) { return x > lo ? g : 0.0; });
}

// ---------------------------------------------------------------- shape ops

Var Tape::concat_cols(Var a, Var b) {
  const Tensor &x = val(a), &y = val(b);
  if (x.rows() != y.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  std::size_t t = x.rows(), da = x.cols(), db = y.cols();
  Tensor out({t, da + db});
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < da; ++c) out.at(r, c) = x.at(r, c);
    for (std::size_t c = 0; c < db; ++c) out.at(r, da + c) = y.at(r, c);
  }
  bool needs = needs_grad(a) || needs_grad(b);
  return push(std::move(out), needs, [a, b, t, da, db](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a)) {
      Tensor& ga = tp.grad_buf(a);
      for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < da; ++c) ga[r * da + c] += g[r * (da + db) + c];
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < db; ++c) gb[r * db + c] += g[r * (da + db) + da + c];
    }
  });
}

Var Tape::slice_cols(Var a, std::size_t lo, std::size_t hi) {
  const Tensor& x = val(a);
  std::size_t t = x.rows(), d = x.cols();
  if (lo >= hi || hi > d) throw std::invalid_argument("slice_cols: bad range");
  Tensor out({t, hi - lo});
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = lo; c < hi; ++c) out.at(r, c - lo) = x.at(r, c);
  return push(std::move(out), needs_grad(a), [a, lo, hi, t, d](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(a)) return;
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = lo; c < hi; ++c) ga[r * d + c] += g[r * (hi - lo) + (c - lo)];
  });
}

Var Tape::slice_rows(Var a, std::size_t lo, std::size_t hi) {
  const Tensor& x = val(a);
  std::size_t t = x.rows(), d = x.cols();
  if (lo >= hi || hi > t) throw std::invalid_argument("slice_rows: bad range");
  Tensor out({hi - lo, d});
  std::copy(x.data() + lo * d, x.data() + hi * d, out.data());
  return push(std::move(out), needs_grad(a), [a, lo, hi, d](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(a)) return;
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t i = 0; i < (hi - lo) * d; ++i) ga[lo * d + i] += g[i];
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  std::size_t d = val(parts[0]).cols();
  std::size_t t = 0;
  bool needs = false;
  for (Var p : parts) {
    if (val(p).cols() != d) throw std::invalid_argument("concat_rows: column mismatch");
    t += val(p).rows();
    needs = needs || needs_grad(p);
  }
  Tensor out({t, d});
  std::size_t off = 0;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    const Tensor& x = val(p);
    offsets.push_back(off);
    std::copy(x.data(), x.data() + x.size(), out.data() + off * d);
    off += x.rows();
  }
  auto parts_copy = parts;
  return push(std::move(out), needs, [parts_copy, offsets, d](Tape& tp, const Tensor& g) {
    for (std::size_t k = 0; k < parts_copy.size(); ++k) {
      Var p = parts_copy[k];
      if (!tp.needs_grad(p)) continue;
      Tensor& gp = tp.grad_buf(p);
      const std::size_t base = offsets[k] * d;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[base + i];
    }
  });
}

Var Tape::row_sum(Var a) {
  const Tensor& x = val(a);
  std::size_t t = x.rows(), d = x.cols();
  Tensor out({t});
  for (std::size_t r = 0; r < t; ++r) {
    double s = 0.0;
    const double* xr = x.row_ptr(r);
    for (std::size_t c = 0; c < d; ++c) s += xr[c];
    out[r] = s;
  }
  return push(std::move(out), needs_grad(a), [a, t, d](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(a)) return;
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < d; ++c) ga[r * d + c] += g[r];
  });
}

// ---------------------------------------------------------------- reductions

Var Tape::sum(Var a) {
  const Tensor& x = val(a);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  return push(Tensor::scalar(s), needs_grad(a), [a](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(a)) return;
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var Tape::mean(Var a) {
  const Tensor& x = val(a);
  if (x.empty()) throw std::invalid_argument("mean: empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  double inv = 1.0 / static_cast<double>(x.size());
  return push(Tensor::scalar(s * inv), needs_grad(a), [a, inv](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(a)) return;
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
  });
}

// ---------------------------------------------------------------- layers

Var Tape::linear(Var x, Var w, Var b) {
  const Tensor &xv = val(x), &wv = val(w), &bv = val(b);
  std::size_t t = xv.rows(), in = xv.cols();
  if (wv.ndim() != 2 || wv.dim(1) != in) throw std::invalid_argument("linear: weight mismatch");
  std::size_t out_dim = wv.dim(0);
  if (bv.size() != out_dim) throw std::invalid_argument("linear: bias mismatch");
  Tensor out({t, out_dim});
  for (std::size_t r = 0; r < t; ++r) {
    const double* xr = xv.row_ptr(r);
    double* yr = out.row_ptr(r);
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = wv.data() + o * in;
      double acc = bv[o];
      for (std::size_t c = 0; c < in; ++c) acc += wr[c] * xr[c];
      yr[o] = acc;
    }
  }
  bool needs = needs_grad(x) || needs_grad(w) || needs_grad(b);
  return push(std::move(out), needs, [x, w, b, t, in, out_dim](Tape& tp, const Tensor& g) {
    const Tensor &xv = tp.val(x), &wv = tp.val(w);
    if (tp.needs_grad(x)) {
      Tensor& gx = tp.grad_buf(x);
      for (std::size_t r = 0; r < t; ++r) {
        const double* gr = g.data() + r * out_dim;
        double* gxr = gx.data() + r * in;
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double* wr = wv.data() + o * in;
          double go = gr[o];
          for (std::size_t c = 0; c < in; ++c) gxr[c] += go * wr[c];
        }
      }
    }
    if (tp.needs_grad(w)) {
      Tensor& gw = tp.grad_buf(w);
      for (std::size_t r = 0; r < t; ++r) {
        const double* gr = g.data() + r * out_dim;
        const double* xr = xv.data() + r * in;
        for (std::size_t o = 0; o < out_dim; ++o) {
          double go = gr[o];
          double* gwr = gw.data() + o * in;
          for (std::size_t c = 0; c < in; ++c) gwr[c] += go * xr[c];
        }
      }
    }
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      for (std::size_t r = 0; r < t; ++r)
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g[r * out_dim + o];
    }
  });
}

Var Tape::conv1d(Var x, Var w, Var b, std::size_t dilation, bool causal) {
  const Tensor &xv = val(x), &wv = val(w), &bv = val(b);
  if (wv.ndim() != 3) throw std::invalid_argument("conv1d: kernel must be [K x O x I]");
  std::size_t t = xv.rows(), in = xv.cols();
  std::size_t k = wv.dim(0), out_ch = wv.dim(1);
  if (wv.dim(2) != in) throw std::invalid_argument("conv1d: channel mismatch");
  if (bv.size() != out_ch) throw std::invalid_argument("conv1d: bias mismatch");
  if (k < 1 || dilation < 1) throw std::invalid_argument("conv1d: bad kernel/dilation");
  const std::ptrdiff_t center = causal ? static_cast<std::ptrdiff_t>(k - 1)
                                       : static_cast<std::ptrdiff_t>((k - 1) / 2);
  const std::ptrdiff_t dil = static_cast<std::ptrdiff_t>(dilation);
  const std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t);

  Tensor out({t, out_ch});
  for (std::ptrdiff_t r = 0; r < tt; ++r) {
    double* yr = out.row_ptr(r);
    for (std::size_t o = 0; o < out_ch; ++o) yr[o] = bv[o];
    for (std::size_t kk = 0; kk < k; ++kk) {
      std::ptrdiff_t s = r + (static_cast<std::ptrdiff_t>(kk) - center) * dil;
      if (s < 0 || s >= tt) continue;
      const double* xr = xv.row_ptr(s);
      const double* wk = wv.data() + kk * out_ch * in;
      for (std::size_t o = 0; o < out_ch; ++o) {
        const double* wr = wk + o * in;
        double acc = 0.0;
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * xr[c];
        yr[o] += acc;
      }
    }
  }
  bool needs = needs_grad(x) || needs_grad(w) || needs_grad(b);
  return push(std::move(out), needs,
              [x, w, b, t, in, k, out_ch, center, dil](Tape& tp, const Tensor& g) {
    const Tensor &xv = tp.val(x), &wv = tp.val(w);
    const std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t);
    bool nx = tp.needs_grad(x), nw = tp.needs_grad(w), nb = tp.needs_grad(b);
    Tensor* gx = nx ? &tp.grad_buf(x) : nullptr;
    Tensor* gw = nw ? &tp.grad_buf(w) : nullptr;
    Tensor* gb = nb ? &tp.grad_buf(b) : nullptr;
    for (std::ptrdiff_t r = 0; r < tt; ++r) {
      const double* gr = g.data() + r * out_ch;
      if (nb)
        for (std::size_t o = 0; o < out_ch; ++o) (*gb)[o] += gr[o];
      for (std::size_t kk = 0; kk < k; ++kk) {
        std::ptrdiff_t s = r + (static_cast<std::ptrdiff_t>(kk) - center) * dil;
        if (s < 0 || s >= tt) continue;
        const double* wk = wv.data() + kk * out_ch * in;
        const double* xr = xv.row_ptr(s);
        if (nx) {
          double* gxr = gx->data() + s * in;
          for (std::size_t o = 0; o < out_ch; ++o) {
            double go = gr[o];
            const double* wr = wk + o * in;
            for (std::size_t c = 0; c < in; ++c) gxr[c] += go * wr[c];
          }
        }
        if (nw) {
          double* gwk = gw->data() + kk * out_ch * in;
          for (std::size_t o = 0; o < out_ch; ++o) {
            double go = gr[o];
            double* gwr = gwk + o * in;
            for (std::size_t c = 0; c < in; ++c) gwr[c] += go * xr[c];
          }
        }
      }
    }
  });
}

Recurrence Tape::recurrent(Var x, Var w_ih, Var w_hh, Var b_ih, Var b_hh, Var w_out, Var b_out,
                           bool feedback, const Tensor& h0, const Tensor& o0) {
  const Tensor& xv = val(x);
  GruWeights gw{&val(w_ih), &val(w_hh), &val(b_ih), &val(b_hh)};
  gw.validate();
  const std::size_t t = xv.rows();
  const std::size_t dbase = xv.cols();
  const std::size_t h = gw.hidden();
  const Tensor& wov = val(w_out);
  if (wov.ndim() != 2 || wov.dim(1) != h)
    throw std::invalid_argument("recurrent: output weight mismatch");
  const std::size_t dout = wov.dim(0);
  if (val(b_out).size() != dout) throw std::invalid_argument("recurrent: output bias mismatch");
  const std::size_t du = dbase + (feedback ? dout : 0);
  if (gw.input() != du) throw std::invalid_argument("recurrent: gru input size mismatch");
  if (!h0.empty() && h0.size() != h) throw std::invalid_argument("recurrent: bad h0");
  if (!o0.empty() && o0.size() != dout) throw std::invalid_argument("recurrent: bad o0");

  // Forward, saving everything BPTT needs.
  auto u_seq = std::make_shared<Tensor>(Tensor({t, du}));
  auto h_seq = std::make_shared<Tensor>(Tensor({t, h}));
  auto gates = std::make_shared<std::vector<GruSaved>>(t);
  Tensor out({t, dout});
  std::vector<double> h_prev(h, 0.0);
  std::vector<double> o_prev(dout, 0.0);
  if (!h0.empty()) h_prev.assign(h0.data(), h0.data() + h);
  if (!o0.empty()) o_prev.assign(o0.data(), o0.data() + dout);
  Tensor h0_saved({h}, std::vector<double>(h_prev));
  const Tensor& bov = val(b_out);
  for (std::size_t r = 0; r < t; ++r) {
    double* u = u_seq->row_ptr(r);
    for (std::size_t c = 0; c < dbase; ++c) u[c] = xv.at(r, c);
    if (feedback)
      for (std::size_t c = 0; c < dout; ++c) u[dbase + c] = o_prev[c];
    gru_cell(u, h_prev.data(), gw, h_seq->row_ptr(r), &(*gates)[r]);
    const double* hr = h_seq->row_ptr(r);
    double* orow = out.row_ptr(r);
    for (std::size_t o = 0; o < dout; ++o) {
      const double* wr = wov.data() + o * h;
      double acc = bov[o];
      for (std::size_t c = 0; c < h; ++c) acc += wr[c] * hr[c];
      orow[o] = acc;
    }
    h_prev.assign(h_seq->row_ptr(r), h_seq->row_ptr(r) + h);
    o_prev.assign(out.row_ptr(r), out.row_ptr(r) + dout);
  }

  Recurrence result;
  result.h_last = Tensor({h}, std::vector<double>(h_prev));
  result.o_last = Tensor({dout}, std::vector<double>(o_prev));

  bool needs = needs_grad(x) || needs_grad(w_ih) || needs_grad(w_hh) || needs_grad(b_ih) ||
               needs_grad(b_hh) || needs_grad(w_out) || needs_grad(b_out);
  result.out = push(
      std::move(out), needs,
      [x, w_ih, w_hh, b_ih, b_hh, w_out, b_out, feedback, t, dbase, h, dout, du, u_seq, h_seq,
       gates, h0_saved](Tape& tp, const Tensor& g) {
        const Tensor& wih = tp.val(w_ih);
        const Tensor& whh = tp.val(w_hh);
        const Tensor& wov = tp.val(w_out);
        bool nx = tp.needs_grad(x);
        Tensor* gx = nx ? &tp.grad_buf(x) : nullptr;
        Tensor& gwih = tp.grad_buf(w_ih);
        Tensor& gwhh = tp.grad_buf(w_hh);
        Tensor& gbih = tp.grad_buf(b_ih);
        Tensor& gbhh = tp.grad_buf(b_hh);
        Tensor& gwo = tp.grad_buf(w_out);
        Tensor& gbo = tp.grad_buf(b_out);

        std::vector<double> gh_next(h, 0.0);
        std::vector<double> gofb(dout, 0.0);
        std::vector<double> go(dout), gh(h), ga(3 * h), gah(3 * h), gu(du);
        for (std::size_t rr = t; rr-- > 0;) {
          const GruSaved& sv = (*gates)[rr];
          const double* hr = h_seq->row_ptr(rr);
          const double* hprev = rr > 0 ? h_seq->row_ptr(rr - 1) : h0_saved.data();
          const double* u = u_seq->row_ptr(rr);

          for (std::size_t o = 0; o < dout; ++o)
            go[o] = g[rr * dout + o] + (feedback ? gofb[o] : 0.0);
          // output layer
          for (std::size_t o = 0; o < dout; ++o) {
            double v = go[o];
            gbo[o] += v;
            double* gwr = gwo.data() + o * h;
            for (std::size_t c = 0; c < h; ++c) gwr[c] += v * hr[c];
          }
          for (std::size_t c = 0; c < h; ++c) {
            double acc = gh_next[c];
            for (std::size_t o = 0; o < dout; ++o) acc += wov.data()[o * h + c] * go[o];
            gh[c] = acc;
          }
          // gate gradients
          for (std::size_t i = 0; i < h; ++i) {
            double r = sv.r[i], z = sv.z[i], n = sv.n[i], m = sv.m[i];
            double gz = gh[i] * (hprev[i] - n) * z * (1.0 - z);
            double gn = gh[i] * (1.0 - z) * (1.0 - n * n);
            double gr = gn * m * r * (1.0 - r);
            double gm = gn * r;
            ga[i] = gr;
            ga[h + i] = gz;
            ga[2 * h + i] = gn;
            gah[i] = gr;
            gah[h + i] = gz;
            gah[2 * h + i] = gm;
          }
          // parameter grads
          for (std::size_t row = 0; row < 3 * h; ++row) {
            double v = ga[row];
            gbih[row] += v;
            double* gwr = gwih.data() + row * du;
            for (std::size_t c = 0; c < du; ++c) gwr[c] += v * u[c];
          }
          for (std::size_t row = 0; row < 3 * h; ++row) {
            double v = gah[row];
            gbhh[row] += v;
            double* gwr = gwhh.data() + row * h;
            for (std::size_t c = 0; c < h; ++c) gwr[c] += v * hprev[c];
          }
          // input grad
          for (std::size_t c = 0; c < du; ++c) {
            double acc = 0.0;
            for (std::size_t row = 0; row < 3 * h; ++row) acc += wih.data()[row * du + c] * ga[row];
            gu[c] = acc;
          }
          if (nx) {
            double* gxr = gx->data() + rr * dbase;
            for (std::size_t c = 0; c < dbase; ++c) gxr[c] += gu[c];
          }
          if (feedback)
            for (std::size_t c = 0; c < dout; ++c) gofb[c] = gu[dbase + c];
          // hidden grad to previous step
          for (std::size_t c = 0; c < h; ++c) {
            double acc = gh[c] * sv.z[c];
            for (std::size_t row = 0; row < 3 * h; ++row)
              acc += whh.data()[row * h + c] * gah[row];
            gh_next[c] = acc;
          }
        }
      });
  return result;
}

Var Tape::softmax_cross_entropy(Var logits, std::size_t target) {
  const Tensor& lv = val(logits);
  std::size_t t = lv.rows(), s = lv.cols();
  if (target >= s) throw std::invalid_argument("softmax_cross_entropy: target out of range");
  auto probs = std::make_shared<Tensor>(Tensor({t, s}));
  double total = 0.0;
  for (std::size_t r = 0; r < t; ++r) {
    const double* lr = lv.row_ptr(r);
    double mx = lr[0];
    for (std::size_t c = 1; c < s; ++c) mx = std::max(mx, lr[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < s; ++c) z += std::exp(lr[c] - mx);
    double* pr = probs->row_ptr(r);
    for (std::size_t c = 0; c < s; ++c) pr[c] = std::exp(lr[c] - mx) / z;
    total += -std::log(std::max(pr[target], kCeProbFloor));
  }
  double inv = 1.0 / static_cast<double>(t);
  return push(Tensor::scalar(total * inv), needs_grad(logits),
              [logits, target, t, s, inv, probs](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(logits)) return;
    Tensor& gl = tp.grad_buf(logits);
    double scale = g[0] * inv;
    for (std::size_t r = 0; r < t; ++r) {
      const double* pr = probs->row_ptr(r);
      double* gr = gl.data() + r * s;
      for (std::size_t c = 0; c < s; ++c) gr[c] += scale * (pr[c] - (c == target ? 1.0 : 0.0));
    }
  });
}

Var Tape::make_node(Tensor value, std::vector<Var> inputs,
                    std::function<void(Tape&, const Tensor&)> back) {
  bool needs = false;
  for (Var v : inputs) needs = needs || needs_grad(v);
  return push(std::move(value), needs, std::move(back));
}

}  // namespace vc::nn
