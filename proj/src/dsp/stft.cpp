#include "vc/dsp/stft.hpp"

#include <cmath>
#include <stdexcept>

#include "vc/dsp/fft.hpp"

namespace vc::dsp {

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  const double twopi = 6.28318530717958647692;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(twopi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n);
  if (m == 1) return 0;
  while (i < 0 || i >= m) {
    if (i < 0) i = -i;
    if (i >= m) i = 2 * (m - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

std::size_t stft_frame_count(std::size_t samples, std::size_t hop) {
  return (samples + hop - 1) / hop;
}

static void validate_stft_args(const Waveform& w, std::size_t fft_size, std::size_t hop,
                               std::size_t win_length) {
  if (w.samples.empty()) throw std::invalid_argument("stft: empty waveform");
  if (!is_power_of_two(fft_size)) throw std::invalid_argument("stft: fft_size must be a power of two");
  if (win_length > fft_size) throw std::invalid_argument("stft: win_length > fft_size");
  if (hop < 1) throw std::invalid_argument("stft: hop must be >= 1");
  if (hop > win_length) throw std::invalid_argument("stft: hop > win_length");
  for (double s : w.samples)
    if (!std::isfinite(s)) throw std::invalid_argument("stft: non-finite sample");
}

Spectrogram stft(const Waveform& w, std::size_t fft_size, std::size_t hop,
                 std::size_t win_length) {
  validate_stft_args(w, fft_size, hop, win_length);
  const std::size_t len = w.samples.size();
  const std::size_t n_frames = stft_frame_count(len, hop);
  const std::size_t pad = fft_size / 2;
  const std::size_t off = (fft_size - win_length) / 2;
  const std::vector<double> win = hann_window(win_length);

  Spectrogram out;
  out.frames = n_frames;
  out.bins = fft_size / 2 + 1;
  out.v.resize(n_frames * out.bins);

  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t f = 0; f < n_frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(f * hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t j = 0; j < win_length; ++j) {
      std::size_t src = reflect_index(base + static_cast<std::ptrdiff_t>(off + j), len);
      buf[off + j] = {w.samples[src] * win[j], 0.0};
    }
    fft_inplace(buf, false);
    for (std::size_t b = 0; b < out.bins; ++b) out.at(f, b) = buf[b];
  }
  return out;
}

Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
  return stft(w, cfg.fft_size, cfg.hop, cfg.win_length);
}

std::vector<double> magnitudes(const Spectrogram& s) {
  std::vector<double> m(s.v.size());
  for (std::size_t i = 0; i < s.v.size(); ++i) m[i] = std::abs(s.v[i]);
  return m;
}

std::vector<double> istft(const Spectrogram& s, std::size_t fft_size, std::size_t hop,
                          std::size_t win_length, std::size_t length) {
  if (s.bins != fft_size / 2 + 1) throw std::invalid_argument("istft: bin count mismatch");
  const std::size_t pad = fft_size / 2;
  const std::size_t off = (fft_size - win_length) / 2;
  const std::vector<double> win = hann_window(win_length);
  const std::size_t acc_len = (s.frames > 0 ? (s.frames - 1) * hop : 0) + fft_size;
  std::vector<double> acc(acc_len, 0.0), wss(acc_len, 0.0);

  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t f = 0; f < s.frames; ++f) {
    for (std::size_t b = 0; b < s.bins; ++b) buf[b] = s.at(f, b);
    for (std::size_t b = s.bins; b < fft_size; ++b) buf[b] = std::conj(s.at(f, fft_size - b));
    fft_inplace(buf, true);
    for (std::size_t j = 0; j < win_length; ++j) {
      std::size_t p = f * hop + off + j;
      acc[p] += buf[off + j].real() * win[j];
      wss[p] += win[j] * win[j];
    }
  }
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    std::size_t p = i + pad;
    if (p < acc_len && wss[p] > 1e-8) out[i] = acc[p] / wss[p];
  }
  return out;
}

}  // namespace vc::dsp
