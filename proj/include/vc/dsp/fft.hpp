#pragma once

#include <complex>
#include <vector>

namespace vc::dsp {

bool is_power_of_two(std::size_t n);

// In-place radix-2 complex FFT. Inverse includes the 1/n scale.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Real input -> one-sided spectrum (n/2 + 1 bins). x is zero-padded/truncated
// to n, which must be a power of two.
std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t n);

}  // namespace vc::dsp
