#include "vc/dsp/aperiodicity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vc/dsp/stft.hpp"

namespace vc::dsp {

std::vector<double> code_aperiodicity(const Waveform& w, const std::vector<F0Frame>& f0,
                                      double frame_shift_ms, std::size_t fft_size,
                                      std::size_t win_length) {
  const double sr = static_cast<double>(w.sample_rate);
  const std::size_t hop = static_cast<std::size_t>(std::lround(sr * frame_shift_ms / 1000.0));
  Spectrogram spec = stft(w, fft_size, hop, win_length);
  if (spec.frames != f0.size())
    throw std::invalid_argument("code_aperiodicity: f0 track frame count mismatch");

  const double bin_hz = sr / static_cast<double>(fft_size);
  // harmonic mask half-width covers the Hann main lobe at this window size
  const std::ptrdiff_t half_width =
      static_cast<std::ptrdiff_t>(std::ceil(3.0 * static_cast<double>(fft_size) /
                                            static_cast<double>(win_length)));

  std::vector<double> out(f0.size() * kApBands, 1.0);
  std::vector<char> harmonic(spec.bins);

  for (std::size_t f = 0; f < spec.frames; ++f) {
    if (!f0[f].voiced) continue;  // stays fully aperiodic

    std::fill(harmonic.begin(), harmonic.end(), 0);
    const double hz = f0[f].f0;
    for (double freq = hz; freq < sr / 2.0; freq += hz) {
      std::ptrdiff_t c = static_cast<std::ptrdiff_t>(std::lround(freq / bin_hz));
      for (std::ptrdiff_t b = c - half_width; b <= c + half_width; ++b)
        if (b >= 0 && b < static_cast<std::ptrdiff_t>(spec.bins)) harmonic[b] = 1;
    }

    for (std::size_t band = 0; band < kApBands; ++band) {
      double lo = kApBandEdges[band];
      double hi = std::min(kApBandEdges[band + 1], sr / 2.0);
      double total = 0.0, harm = 0.0;
      for (std::size_t b = 0; b < spec.bins; ++b) {
        double freq = static_cast<double>(b) * bin_hz;
        if (freq < lo || freq >= hi) continue;
        double p = std::norm(spec.at(f, b));
        total += p;
        if (harmonic[b]) harm += p;
      }
      double ap = 1.0;
      if (total > 1e-12) ap = std::clamp(1.0 - harm / total, 0.0, 1.0);
      out[f * kApBands + band] = ap;
    }
  }
  return out;
}

}  // namespace vc::dsp
