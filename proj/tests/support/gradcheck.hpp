#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "vc/nn/store.hpp"

namespace vc::testsupport {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "name[i]" of the worst coordinate
  bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences over every coordinate of every parameter in the
// store, compared against the analytic gradients the loss closure accumulates.
// loss_fn must rebuild its tape from the store on each call and, when
// accumulate_grads is set, run backward into store.grad.
inline GradCheckResult gradcheck(vc::nn::ParameterStore& store,
                                 const std::function<double(bool accumulate_grads)>& loss_fn,
                                 double step = 1e-5) {
  store.zero_grads();
  loss_fn(true);
  std::map<std::string, vc::nn::Tensor> analytic;
  for (auto& [name, e] : store.entries()) analytic.emplace(name, e.grad);
  store.zero_grads();

  GradCheckResult res;
  for (auto& [name, e] : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double keep = e.value[i];
      e.value[i] = keep + step;
      double up = loss_fn(false);
      e.value[i] = keep - step;
      double dn = loss_fn(false);
      e.value[i] = keep;
      double numeric = (up - dn) / (2.0 * step);
      double a = analytic.at(name)[i];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-4});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace vc::testsupport
