#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vc/dsp/f0.hpp"
#include "vc/dsp/wav.hpp"

namespace vc::dsp {

// One spectral frame: mel-cepstrum with index 0 the power coefficient.
struct SpectralFrame {
  std::vector<double> mel_cepstrum;
};

// One excitation frame: continuous log-F0, binary voicing, coded aperiodicity.
struct ExcitationFrame {
  double log_f0 = 0.0;
  bool uv = false;
  std::vector<double> coded_ap;
};

// Per-utterance acoustic features, stored frame-major.
struct AcousticFrameSequence {
  std::size_t mcep_dim = 0;
  std::size_t ap_dim = 3;
  double frame_shift_ms = 5.0;
  std::size_t sample_rate = 24000;

  std::vector<double> mcep;          // frames x mcep_dim
  std::vector<double> log_f0;        // frames
  std::vector<std::uint8_t> uv;      // frames
  std::vector<double> coded_ap;      // frames x ap_dim

  std::size_t frames() const { return log_f0.size(); }
  std::size_t excitation_dim() const { return 2 + ap_dim; }
  std::size_t feature_dim() const { return mcep_dim + excitation_dim(); }

  std::span<const double> mcep_frame(std::size_t t) const {
    return {mcep.data() + t * mcep_dim, mcep_dim};
  }
  std::span<double> mcep_frame(std::size_t t) { return {mcep.data() + t * mcep_dim, mcep_dim}; }
  std::span<const double> ap_frame(std::size_t t) const {
    return {coded_ap.data() + t * ap_dim, ap_dim};
  }

  SpectralFrame spectral_frame(std::size_t t) const;
  ExcitationFrame excitation_frame(std::size_t t) const;

  void validate() const;  // uniform dims, finite values, uv in {0,1}
};

struct AnalysisConfig {
  std::size_t sample_rate = 24000;
  std::size_t fft_size = 2048;
  std::size_t window_length = 1200;
  double frame_shift_ms = 5.0;
  std::size_t mcep_order = 48;  // D_mc = 49 including power
  double alpha = 0.466;
  double f0_min = 70.0;
  double f0_max = 400.0;
  double clarity_threshold = 0.45;
  std::size_t ap_fft_size = 2048;
  std::size_t ap_window_length = 1024;
  // With no voiced frame, analysis normally fails (ingest wants that);
  // evaluation of arbitrary audio sets this to hold log(f0_min) instead.
  bool allow_unvoiced = false;

  std::size_t hop() const;
};

// Full analysis: STFT + warped cepstrum, pitch, interpolated log-F0, coded
// aperiodicity. All tracks share the frame count ceil(len/hop).
AcousticFrameSequence analyze_utterance(const Waveform& w, const AnalysisConfig& cfg);

// Frame power in dB relative to the loudest frame (from the power
// coefficient; the mel-cepstrum is in natural log of magnitude).
std::vector<double> relative_power_db(const AcousticFrameSequence& seq);

// Half-open frame range kept by edge trimming at threshold_db.
std::pair<std::size_t, std::size_t> trim_range(const AcousticFrameSequence& seq,
                                               double power_threshold_db);

// Removes leading and trailing runs of frames below the threshold; interior
// frames stay. Throws "empty utterance" when every frame is below.
AcousticFrameSequence trim_silence(const AcousticFrameSequence& seq, double power_threshold_db);

AcousticFrameSequence slice_frames(const AcousticFrameSequence& seq, std::size_t begin,
                                   std::size_t end);

// Mel-cepstral distortion in dB over coefficients 1..D-1 (power excluded):
// (10/ln 10) * sqrt(2 * sum_d (a_d - b_d)^2).
double mcd(std::span<const double> a, std::span<const double> b);
double mcd(const SpectralFrame& a, const SpectralFrame& b);

inline constexpr double kMcdScale = 4.342944819032518;  // 10 / ln 10

}  // namespace vc::dsp
