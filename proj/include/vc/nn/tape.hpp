#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vc/nn/gru.hpp"
#include "vc/nn/store.hpp"
#include "vc/nn/tensor.hpp"

namespace vc::nn {

class Tape;

// Handle to a node on a tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Result of the fused recurrent driver. h_last/o_last are detached values for
// carrying state across truncated-BPTT segments.
struct Recurrence {
  Var out;
  Tensor h_last;
  Tensor o_last;
};

// Eager reverse-mode tape. Operations execute immediately and record a
// backward closure; creation order is a valid topological order, so the
// reverse pass walks node ids backwards. Single-writer: one training step
// owns a tape exclusively.
class Tape {
 public:
  Var constant(Tensor value);

  // Binds a store entry as a leaf. Repeated calls with the same entry return
  // the same node, so gradients from shared weights accumulate naturally.
  // backward() flushes leaf gradients back into the store.
  Var param(ParameterStore& store, const std::string& name);

  const Tensor& val(Var v) const;
  bool needs_grad(Var v) const;

  // Gradient buffer of a node, allocated on first touch. For use by custom
  // backward closures.
  Tensor& grad_buf(Var v);

  // Reverse pass from a scalar loss; accumulates d(loss)/d(param) into the
  // bound ParameterStore entries (without zeroing them first, so multiple
  // tapes can accumulate one batch).
  void backward(Var loss);

  std::size_t num_nodes() const { return nodes_.size(); }

  // ---- elementwise ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var add_scalar(Var a, double c);
  Var mul_scalar(Var a, double c);
  Var neg(Var a);
  Var abs(Var a);
  // y = x * s[0] with s a size-1 node (learnable global gain)
  Var scale_by(Var x, Var s);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var square(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var leaky_relu(Var a, double slope);
  Var clamp_min(Var a, double lo);

  // ---- shape ----
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, std::size_t lo, std::size_t hi);
  Var slice_rows(Var a, std::size_t lo, std::size_t hi);
  Var concat_rows(const std::vector<Var>& parts);
  Var row_sum(Var a);  // [T x D] -> [T]

  // ---- reductions ----
  Var sum(Var a);
  Var mean(Var a);

  // ---- layers ----
  // x [T x I], w [O x I], b [O] -> [T x O]
  Var linear(Var x, Var w, Var b);
  // x [T x I], w [K x O x I], b [O]; same-length output. Non-causal padding
  // is symmetric, causal is left-only.
  Var conv1d(Var x, Var w, Var b, std::size_t dilation, bool causal);
  // Gated recurrent sequence with dense output layer; when feedback is set
  // the previous output frame is concatenated to the next recurrent input.
  // h0/o0 are detached initial states (pass empty tensors for zeros).
  Recurrence recurrent(Var x, Var w_ih, Var w_hh, Var b_ih, Var b_hh, Var w_out, Var b_out,
                       bool feedback, const Tensor& h0 = {}, const Tensor& o0 = {});
  // Mean over rows of -log softmax(logits)[target].
  Var softmax_cross_entropy(Var logits, std::size_t target);

  // Custom-node hook for modules that add their own primitives. The closure
  // receives the output gradient and accumulates into input grad_bufs.
  Var make_node(Tensor value, std::vector<Var> inputs,
                std::function<void(Tape&, const Tensor& grad_out)> back);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs = false;
    std::function<void(Tape&, const Tensor&)> back;  // null for leaves
  };

  Var push(Tensor value, bool needs, std::function<void(Tape&, const Tensor&)> back);
  Var unary(Var a, Tensor value, std::function<double(double gout, double x, double y)> dfn);

  std::vector<Node> nodes_;
  std::vector<std::pair<int, ParamEntry*>> param_binds_;
  std::vector<std::pair<const void*, int>> param_lookup_;  // entry ptr -> node id
};

}  // namespace vc::nn
