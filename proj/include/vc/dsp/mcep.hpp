#pragma once

#include <span>
#include <vector>

namespace vc::dsp {

// Magnitude floor applied before any log.
inline constexpr double kMagnitudeFloor = 1e-10;

// First-order all-pass phase: the image of omega on the warped axis.
double warp_frequency(double omega, double alpha);

// Oppenheim frequency transform: rewrites the one-sided coefficient sequence
// of log|S| (c_0 + sum_k c_k e^{-jkw} convention) onto the warped axis.
// out.size() - 1 is the target order.
void freqt(std::span<const double> in, double alpha, std::span<double> out);

// One-sided real cepstrum of a log-magnitude frame: inverse DFT coefficients
// of the even extension. magnitude has n/2+1 bins, n a power of two.
std::vector<double> real_cepstrum(std::span<const double> magnitude);

// Mel-cepstrum of one magnitude frame: cepstrum of the log magnitude
// re-expressed on the all-pass warped frequency axis, truncated to order+1
// coefficients. Coefficient 0 tracks log frame power.
std::vector<double> mel_cepstrum_analysis(std::span<const double> magnitude, double alpha,
                                          std::size_t order);

}  // namespace vc::dsp
