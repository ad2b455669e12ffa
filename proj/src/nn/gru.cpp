#include "vc/nn/gru.hpp"

#include <cmath>
#include <stdexcept>

namespace vc::nn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y[0..rows) += W[row_off..row_off+rows) * x, W stored [R x C] row-major.
inline void matvec_acc(const Tensor& w, std::size_t row_off, std::size_t rows, const double* x,
                       std::size_t n, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + (row_off + r) * n;
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

}  // namespace

void GruWeights::validate() const {
  if (!w_ih || !w_hh || !b_ih || !b_hh) throw std::invalid_argument("gru: missing weights");
  std::size_t h = w_hh->dim(1);
  if (w_hh->dim(0) != 3 * h || w_ih->dim(0) != 3 * h || b_ih->size() != 3 * h ||
      b_hh->size() != 3 * h)
    throw std::invalid_argument("gru: inconsistent weight shapes");
}

void gru_cell(const double* x, const double* h_prev, const GruWeights& w, double* h_out,
              GruSaved* saved) {
  const std::size_t h = w.hidden();
  const std::size_t din = w.input();

  std::vector<double> ai(3 * h);  // input-side preactivations + both biases
  for (std::size_t i = 0; i < 3 * h; ++i) ai[i] = (*w.b_ih)[i];
  matvec_acc(*w.w_ih, 0, 3 * h, x, din, ai.data());

  std::vector<double> ah(3 * h);
  for (std::size_t i = 0; i < 3 * h; ++i) ah[i] = (*w.b_hh)[i];
  matvec_acc(*w.w_hh, 0, 3 * h, h_prev, h, ah.data());

  if (saved) {
    saved->r.resize(h);
    saved->z.resize(h);
    saved->n.resize(h);
    saved->m.resize(h);
  }
  for (std::size_t i = 0; i < h; ++i) {
    double r = sigmoid(ai[i] + ah[i]);
    double z = sigmoid(ai[h + i] + ah[h + i]);
    double m = ah[2 * h + i];
    double n = std::tanh(ai[2 * h + i] + r * m);
    double out = (1.0 - z) * n + z * h_prev[i];
    if (saved) {
      saved->r[i] = r;
      saved->z[i] = z;
      saved->n[i] = n;
      saved->m[i] = m;
    }
    h_out[i] = out;
  }
}

Tensor gru_step(const Tensor& x, const Tensor& h_prev, const GruWeights& w) {
  w.validate();
  if (x.size() != w.input()) throw std::invalid_argument("gru_step: input size mismatch");
  if (h_prev.size() != w.hidden()) throw std::invalid_argument("gru_step: hidden size mismatch");
  Tensor h({w.hidden()});
  gru_cell(x.data(), h_prev.data(), w, h.data(), nullptr);
  return h;
}

}  // namespace vc::nn
