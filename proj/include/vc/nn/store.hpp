#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vc/nn/random.hpp"
#include "vc/nn/tensor.hpp"

namespace vc::nn {

// One trainable array: value, gradient slot, and Adam moment buffers.
struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
};

// Named, shaped flat arrays of trainable weights. std::map keeps iteration
// order deterministic, which checkpointing and the optimizer rely on.
class ParameterStore {
 public:
  Tensor& create(const std::string& name, Tensor init);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;

  std::map<std::string, ParamEntry>& entries() { return entries_; }
  const std::map<std::string, ParamEntry>& entries() const { return entries_; }

  std::size_t total_size() const;
  void zero_grads();
  double grad_norm() const;

  // Scales all gradients so the global L2 norm is at most max_norm.
  void clip_grad_norm(double max_norm);

 private:
  std::map<std::string, ParamEntry> entries_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every entry in the store; zeroes gradients
// afterwards. step_count is incremented first, so pass 0 before the first
// update.
void adam_step(ParameterStore& store, const AdamConfig& cfg, std::uint64_t& step_count);

// Uniform(-s, s) init with s = gain / sqrt(fan_in).
Tensor uniform_init(const std::vector<std::size_t>& shape, std::size_t fan_in, Rng& rng,
                    double gain = 1.0);

}  // namespace vc::nn
