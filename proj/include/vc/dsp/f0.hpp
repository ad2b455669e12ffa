#pragma once

#include <vector>

#include "vc/dsp/wav.hpp"

namespace vc::dsp {

struct F0Frame {
  double f0 = 0.0;  // Hz, 0 when unvoiced
  bool voiced = false;
};

// Voiced log-F0 mean and standard deviation for one speaker.
struct LogF0Stats {
  double mean = 0.0;
  double std = 1.0;
};

// Normalized-autocorrelation pitch search over the lag window
// [sr/f0_max, sr/f0_min], one frame per hop, frame centers at t*hop.
// Frames whose analysis segment would overrun the signal are unvoiced.
std::vector<F0Frame> estimate_f0(const Waveform& w, double f0_min, double f0_max,
                                 double frame_shift_ms, double clarity_threshold = 0.45);

// Continuous log-F0 track: log f0 on voiced frames, linear interpolation
// between voiced islands, edge hold outside. Throws "unvoiced utterance"
// when no frame is voiced.
std::vector<double> interpolate_log_f0(const std::vector<F0Frame>& f0);

// Stats over a bag of voiced log-F0 values; std is floored at 1e-3.
LogF0Stats log_f0_stats(const std::vector<double>& voiced_log_f0);

// Affine map tgt.mean + (tgt.std/src.std) * (x - src.mean).
double transform_log_f0(double log_f0, const LogF0Stats& src, const LogF0Stats& tgt);

}  // namespace vc::dsp
