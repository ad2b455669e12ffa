#pragma once

#include "vc/nn/tensor.hpp"

namespace vc::nn {

// Gated recurrent cell weights. Gate rows are stacked (reset, update,
// candidate): w_ih is [3H x Din], w_hh is [3H x H], biases are [3H].
struct GruWeights {
  const Tensor* w_ih = nullptr;
  const Tensor* w_hh = nullptr;
  const Tensor* b_ih = nullptr;
  const Tensor* b_hh = nullptr;

  std::size_t hidden() const { return w_hh->dim(1); }
  std::size_t input() const { return w_ih->dim(1); }
  void validate() const;
};

// Per-step activations saved for backpropagation through time.
struct GruSaved {
  std::vector<double> r, z, n, m;  // m = w_hn h_prev + b_hn (pre reset gating)
};

// One gated recurrent update:
//   r = sigmoid(w_ir x + b_ir + w_hr h + b_hr)
//   z = sigmoid(w_iz x + b_iz + w_hz h + b_hz)
//   n = tanh(w_in x + b_in + r .* (w_hn h + b_hn))
//   h' = (1 - z) .* n + z .* h
// x has length Din, h_prev and h_out have length H. saved may be null.
void gru_cell(const double* x, const double* h_prev, const GruWeights& w, double* h_out,
              GruSaved* saved);

// Shape-checked single step over rank-1 tensors (sequence drivers live on the
// tape; this is the standalone op).
Tensor gru_step(const Tensor& x, const Tensor& h_prev, const GruWeights& w);

}  // namespace vc::nn
