#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>

#include "vc/nn/tensor.hpp"

namespace vc::nn {

// xoshiro256++ with splitmix64 seeding. Self-contained so that sampling is
// bit-identical across platforms and the full state serializes into
// checkpoints (std::random distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01();

  // Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal();

  // Standard Laplace via eps = sign(U) ln(1 - 2|U|), U uniform on (-1/2, 1/2].
  // The log argument is clamped at 1e-12 to keep the tail finite.
  double laplace();

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

// The inverse-CDF map used by Rng::laplace, exposed for direct evaluation.
double laplace_from_uniform(double u);

Tensor sample_gaussian(const std::vector<std::size_t>& shape, Rng& rng);
Tensor sample_laplace(const std::vector<std::size_t>& shape, Rng& rng);

}  // namespace vc::nn
