#pragma once

#include <complex>
#include <vector>

#include "vc/dsp/wav.hpp"

namespace vc::dsp {

// Frame-major complex spectrogram, one-sided bins.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> v;

  std::complex<double>& at(std::size_t f, std::size_t b) { return v[f * bins + b]; }
  std::complex<double> at(std::size_t f, std::size_t b) const { return v[f * bins + b]; }
};

struct StftConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 120;
  std::size_t win_length = 1200;
};

// Periodic Hann window.
std::vector<double> hann_window(std::size_t n);

// Reflected index into [0, n); the bounce never repeats the edge sample.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

// Centered STFT with reflection padding: frame f covers the window centered
// at sample f*hop, frame count = ceil(len/hop).
Spectrogram stft(const Waveform& w, std::size_t fft_size, std::size_t hop,
                 std::size_t win_length);
Spectrogram stft(const Waveform& w, const StftConfig& cfg);

// Frame-major magnitudes |bin|.
std::vector<double> magnitudes(const Spectrogram& s);

// Overlap-add inverse with squared-window compensation; returns length
// samples. Interior samples reconstruct the input up to rounding.
std::vector<double> istft(const Spectrogram& s, std::size_t fft_size, std::size_t hop,
                          std::size_t win_length, std::size_t length);

std::size_t stft_frame_count(std::size_t samples, std::size_t hop);

}  // namespace vc::dsp
