#include "vc/dsp/f0.hpp"

#include <cmath>
#include <stdexcept>

#include "vc/dsp/stft.hpp"

namespace vc::dsp {

std::vector<F0Frame> estimate_f0(const Waveform& w, double f0_min, double f0_max,
                                 double frame_shift_ms, double clarity_threshold) {
  const double sr = static_cast<double>(w.sample_rate);
  if (!(0.0 < f0_min && f0_min < f0_max && f0_max < sr / 4.0))
    throw std::invalid_argument("estimate_f0: need 0 < f0_min < f0_max < sample_rate/4");
  if (w.samples.empty()) throw std::invalid_argument("estimate_f0: empty waveform");

  const std::size_t hop = static_cast<std::size_t>(std::lround(sr * frame_shift_ms / 1000.0));
  const std::size_t n_frames = stft_frame_count(w.samples.size(), hop);
  const std::size_t max_lag = static_cast<std::size_t>(std::ceil(sr / f0_min));
  const std::size_t min_lag = std::max<std::size_t>(2, static_cast<std::size_t>(sr / f0_max));
  const std::size_t win = max_lag;  // correlation window; segment is 2*max_lag

  std::vector<F0Frame> out(n_frames);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(w.samples.size());
  std::vector<double> seg(2 * max_lag);

  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(f * hop);
    const std::ptrdiff_t start = center - static_cast<std::ptrdiff_t>(max_lag);
    if (start < 0 || start + static_cast<std::ptrdiff_t>(2 * max_lag) > len) continue;  // unvoiced

    double mean = 0.0;
    for (std::size_t i = 0; i < 2 * max_lag; ++i) mean += w.samples[start + i];
    mean /= static_cast<double>(2 * max_lag);
    for (std::size_t i = 0; i < 2 * max_lag; ++i) seg[i] = w.samples[start + i] - mean;

    // prefix sums of squares for the lag-shifted energies
    double e0 = 0.0;
    for (std::size_t i = 0; i < win; ++i) e0 += seg[i] * seg[i];
    if (e0 < 1e-12) continue;  // silence

    double best_r = -1.0;
    std::vector<double> rs(max_lag + 1, 0.0);
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      double dot = 0.0, et = 0.0;
      const double* a = seg.data();
      const double* b = seg.data() + lag;
      for (std::size_t i = 0; i < win; ++i) {
        dot += a[i] * b[i];
        et += b[i] * b[i];
      }
      double denom = std::sqrt(e0 * et);
      rs[lag] = denom > 1e-12 ? dot / denom : 0.0;
      best_r = std::max(best_r, rs[lag]);
    }
    if (best_r < clarity_threshold) continue;

    // earliest local maximum within tolerance of the global peak, so period
    // multiples of a strongly periodic signal do not halve the pitch
    std::size_t best_lag = 0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      if (rs[lag] < best_r - 0.02) continue;
      bool left_ok = lag == min_lag || rs[lag] >= rs[lag - 1];
      bool right_ok = lag == max_lag || rs[lag] >= rs[lag + 1];
      if (left_ok && right_ok) {
        best_lag = lag;
        break;
      }
    }
    if (best_lag == 0) continue;
    double peak = rs[best_lag];

    double lag_refined = static_cast<double>(best_lag);
    if (best_lag > min_lag && best_lag < max_lag) {
      double rp = rs[best_lag - 1], rn = rs[best_lag + 1];
      double denom = rp - 2.0 * peak + rn;
      if (std::fabs(denom) > 1e-12) {
        double delta = 0.5 * (rp - rn) / denom;
        if (std::fabs(delta) <= 1.0) lag_refined += delta;
      }
    }
    out[f].f0 = sr / lag_refined;
    out[f].voiced = true;
  }
  return out;
}

std::vector<double> interpolate_log_f0(const std::vector<F0Frame>& f0) {
  std::vector<std::size_t> voiced;
  for (std::size_t i = 0; i < f0.size(); ++i)
    if (f0[i].voiced) voiced.push_back(i);
  if (voiced.empty()) throw std::runtime_error("interpolate_log_f0: unvoiced utterance");

  std::vector<double> out(f0.size());
  auto lf = [&](std::size_t i) { return std::log(f0[i].f0); };

  for (std::size_t i = 0; i <= voiced.front(); ++i) out[i] = lf(voiced.front());
  for (std::size_t i = voiced.back(); i < f0.size(); ++i) out[i] = lf(voiced.back());
  for (std::size_t k = 0; k + 1 < voiced.size(); ++k) {
    std::size_t a = voiced[k], b = voiced[k + 1];
    double la = lf(a), lb = lf(b);
    for (std::size_t i = a; i <= b; ++i) {
      double t = b == a ? 0.0 : static_cast<double>(i - a) / static_cast<double>(b - a);
      out[i] = la + t * (lb - la);
    }
  }
  return out;
}

LogF0Stats log_f0_stats(const std::vector<double>& voiced_log_f0) {
  if (voiced_log_f0.empty()) throw std::runtime_error("log_f0_stats: no voiced frames");
  double mean = 0.0;
  for (double v : voiced_log_f0) mean += v;
  mean /= static_cast<double>(voiced_log_f0.size());
  double var = 0.0;
  for (double v : voiced_log_f0) var += (v - mean) * (v - mean);
  var /= static_cast<double>(voiced_log_f0.size());
  LogF0Stats s;
  s.mean = mean;
  s.std = std::max(std::sqrt(var), 1e-3);
  return s;
}

double transform_log_f0(double log_f0, const LogF0Stats& src, const LogF0Stats& tgt) {
  if (src.std <= 0.0) throw std::invalid_argument("transform_log_f0: source std must be > 0");
  return tgt.mean + (tgt.std / src.std) * (log_f0 - src.mean);
}

}  // namespace vc::dsp
