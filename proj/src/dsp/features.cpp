#include "vc/dsp/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vc/dsp/aperiodicity.hpp"
#include "vc/dsp/mcep.hpp"
#include "vc/dsp/stft.hpp"

namespace vc::dsp {

SpectralFrame AcousticFrameSequence::spectral_frame(std::size_t t) const {
  auto f = mcep_frame(t);
  return SpectralFrame{{f.begin(), f.end()}};
}

ExcitationFrame AcousticFrameSequence::excitation_frame(std::size_t t) const {
  auto a = ap_frame(t);
  return ExcitationFrame{log_f0[t], uv[t] != 0, {a.begin(), a.end()}};
}

void AcousticFrameSequence::validate() const {
  const std::size_t t = frames();
  if (mcep.size() != t * mcep_dim || uv.size() != t || coded_ap.size() != t * ap_dim)
    throw std::runtime_error("features: inconsistent track lengths");
  for (double v : mcep)
    if (!std::isfinite(v)) throw std::runtime_error("features: non-finite mel-cepstrum");
  for (double v : log_f0)
    if (!std::isfinite(v)) throw std::runtime_error("features: non-finite log-F0");
  for (auto v : uv)
    if (v > 1) throw std::runtime_error("features: uv flag out of {0,1}");
  for (double v : coded_ap)
    if (!(v >= 0.0 && v <= 1.0)) throw std::runtime_error("features: coded_ap out of [0,1]");
}

std::size_t AnalysisConfig::hop() const {
  return static_cast<std::size_t>(
      std::lround(static_cast<double>(sample_rate) * frame_shift_ms / 1000.0));
}

AcousticFrameSequence analyze_utterance(const Waveform& w, const AnalysisConfig& cfg) {
  if (w.sample_rate != cfg.sample_rate)
    throw std::runtime_error("analyze: sample rate mismatch (got " +
                             std::to_string(w.sample_rate) + ", expected " +
                             std::to_string(cfg.sample_rate) + "); resample before ingest");

  Spectrogram spec = stft(w, cfg.fft_size, cfg.hop(), cfg.window_length);
  std::vector<F0Frame> f0 =
      estimate_f0(w, cfg.f0_min, cfg.f0_max, cfg.frame_shift_ms, cfg.clarity_threshold);
  if (f0.size() != spec.frames) throw std::runtime_error("analyze: frame count mismatch");

  AcousticFrameSequence seq;
  seq.mcep_dim = cfg.mcep_order + 1;
  seq.ap_dim = kApBands;
  seq.frame_shift_ms = cfg.frame_shift_ms;
  seq.sample_rate = cfg.sample_rate;
  seq.mcep.resize(spec.frames * seq.mcep_dim);
  seq.uv.resize(spec.frames);

  std::vector<double> mag(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t b = 0; b < spec.bins; ++b) mag[b] = std::abs(spec.at(t, b));
    std::vector<double> mc = mel_cepstrum_analysis(mag, cfg.alpha, cfg.mcep_order);
    std::copy(mc.begin(), mc.end(), seq.mcep.begin() + t * seq.mcep_dim);
    seq.uv[t] = f0[t].voiced ? 1 : 0;
  }

  bool any_voiced = false;
  for (const auto& fr : f0) any_voiced = any_voiced || fr.voiced;
  if (!any_voiced) {
    double peak = -1e300;
    for (std::size_t t = 0; t < spec.frames; ++t)
      peak = std::max(peak, seq.mcep[t * seq.mcep_dim]);
    if (peak <= std::log(kMagnitudeFloor) + 1e-9)
      throw std::runtime_error("analyze: empty utterance (silence)");
  }
  if (!any_voiced && cfg.allow_unvoiced)
    seq.log_f0.assign(spec.frames, std::log(cfg.f0_min));
  else
    seq.log_f0 = interpolate_log_f0(f0);
  seq.coded_ap =
      code_aperiodicity(w, f0, cfg.frame_shift_ms, cfg.ap_fft_size, cfg.ap_window_length);
  seq.validate();
  return seq;
}

std::vector<double> relative_power_db(const AcousticFrameSequence& seq) {
  const std::size_t t = seq.frames();
  std::vector<double> db(t);
  double peak = -1e300;
  for (std::size_t i = 0; i < t; ++i) peak = std::max(peak, seq.mcep[i * seq.mcep_dim]);
  for (std::size_t i = 0; i < t; ++i)
    db[i] = 20.0 / std::log(10.0) * (seq.mcep[i * seq.mcep_dim] - peak);
  return db;
}

std::pair<std::size_t, std::size_t> trim_range(const AcousticFrameSequence& seq,
                                               double power_threshold_db) {
  // a fully silent utterance has every power coefficient at the log of the
  // magnitude floor; relative dB cannot flag it, so check absolutely
  double peak = -1e300;
  for (std::size_t t = 0; t < seq.frames(); ++t)
    peak = std::max(peak, seq.mcep[t * seq.mcep_dim]);
  if (peak <= std::log(kMagnitudeFloor) + 1e-9)
    throw std::runtime_error("trim_silence: empty utterance");

  std::vector<double> db = relative_power_db(seq);
  std::size_t begin = 0, end = db.size();
  while (begin < end && db[begin] < power_threshold_db) ++begin;
  while (end > begin && db[end - 1] < power_threshold_db) --end;
  if (begin == end) throw std::runtime_error("trim_silence: empty utterance");
  return {begin, end};
}

AcousticFrameSequence slice_frames(const AcousticFrameSequence& seq, std::size_t begin,
                                   std::size_t end) {
  AcousticFrameSequence out;
  out.mcep_dim = seq.mcep_dim;
  out.ap_dim = seq.ap_dim;
  out.frame_shift_ms = seq.frame_shift_ms;
  out.sample_rate = seq.sample_rate;
  out.mcep.assign(seq.mcep.begin() + begin * seq.mcep_dim, seq.mcep.begin() + end * seq.mcep_dim);
  out.log_f0.assign(seq.log_f0.begin() + begin, seq.log_f0.begin() + end);
  out.uv.assign(seq.uv.begin() + begin, seq.uv.begin() + end);
  out.coded_ap.assign(seq.coded_ap.begin() + begin * seq.ap_dim,
                      seq.coded_ap.begin() + end * seq.ap_dim);
  return out;
}

AcousticFrameSequence trim_silence(const AcousticFrameSequence& seq, double power_threshold_db) {
  auto [begin, end] = trim_range(seq, power_threshold_db);
  return slice_frames(seq, begin, end);
}

double mcd(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("mcd: dimension mismatch");
  if (a.size() < 2) throw std::invalid_argument("mcd: need at least 2 coefficients");
  double s = 0.0;
  for (std::size_t d = 1; d < a.size(); ++d) {
    double diff = a[d] - b[d];
    s += diff * diff;
  }
  return kMcdScale * std::sqrt(2.0 * s);
}

double mcd(const SpectralFrame& a, const SpectralFrame& b) {
  return mcd(std::span<const double>(a.mel_cepstrum), std::span<const double>(b.mel_cepstrum));
}

}  // namespace vc::dsp
