#pragma once

#include <vector>

#include "vc/dsp/f0.hpp"
#include "vc/dsp/wav.hpp"

namespace vc::dsp {

inline constexpr std::size_t kApBands = 3;

// Band edges in Hz for the 3-band coded aperiodicity: 0-3k, 3k-7.5k,
// 7.5k-12k (upper edges clamped to Nyquist).
inline constexpr double kApBandEdges[kApBands + 1] = {0.0, 3000.0, 7500.0, 12000.0};

// Per-frame ratio of non-harmonic to total band energy, clamped to [0, 1].
// Unvoiced or degenerate frames yield 1.0 (fully aperiodic). Returns
// frames x 3 flat, frame count matching the f0 track.
std::vector<double> code_aperiodicity(const Waveform& w, const std::vector<F0Frame>& f0,
                                      double frame_shift_ms, std::size_t fft_size = 2048,
                                      std::size_t win_length = 1024);

}  // namespace vc::dsp
