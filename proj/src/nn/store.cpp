#include "vc/nn/store.hpp"

#include <cmath>
#include <stdexcept>

namespace vc::nn {

Tensor& ParameterStore::create(const std::string& name, Tensor init) {
  if (entries_.count(name))
    throw std::invalid_argument("ParameterStore: duplicate name " + name);
  ParamEntry e;
  e.grad = Tensor::zeros(init.shape());
  e.m = Tensor::zeros(init.shape());
  e.v = Tensor::zeros(init.shape());
  e.value = std::move(init);
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

ParamEntry& ParameterStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw std::invalid_argument("ParameterStore: unknown name " + name);
  return it->second;
}

const ParamEntry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw std::invalid_argument("ParameterStore: unknown name " + name);
  return it->second;
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [k, e] : entries_) n += e.value.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& [k, e] : entries_) e.grad.fill(0.0);
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [k, e] : entries_)
    for (double g : e.grad.values()) s += g * g;
  return std::sqrt(s);
}

void ParameterStore::clip_grad_norm(double max_norm) {
  double n = grad_norm();
  if (n <= max_norm || n == 0.0) return;
  double scale = max_norm / n;
  for (auto& [k, e] : entries_)
    for (double& g : e.grad.values()) g *= scale;
}

void adam_step(ParameterStore& store, const AdamConfig& cfg, std::uint64_t& step_count) {
  ++step_count;
  const double t = static_cast<double>(step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [k, e] : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double g = e.grad[i];
      e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
      e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = e.m[i] / c1;
      double vhat = e.v[i] / c2;
      e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    e.grad.fill(0.0);
  }
}

Tensor uniform_init(const std::vector<std::size_t>& shape, std::size_t fan_in, Rng& rng,
                    double gain) {
  Tensor t(shape);
  double s = gain / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (2.0 * rng.uniform01() - 1.0) * s;
  return t;
}

}  // namespace vc::nn
