#include "vc/dsp/mcep.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "vc/dsp/fft.hpp"

namespace vc::dsp {

double warp_frequency(double omega, double alpha) {
  return omega + 2.0 * std::atan(alpha * std::sin(omega) / (1.0 - alpha * std::cos(omega)));
}

void freqt(std::span<const double> in, double alpha, std::span<double> out) {
  const std::size_t m2 = out.size() - 1;
  std::vector<double> g(m2 + 1, 0.0), d(m2 + 1, 0.0);
  const double b = 1.0 - alpha * alpha;
  for (std::size_t i = in.size(); i-- > 0;) {
    d[0] = g[0];
    g[0] = in[i] + alpha * d[0];
    if (m2 >= 1) {
      d[1] = g[1];
      g[1] = b * d[0] + alpha * d[1];
    }
    for (std::size_t m = 2; m <= m2; ++m) {
      d[m] = g[m];
      g[m] = d[m - 1] + alpha * (d[m] - g[m - 1]);
    }
  }
  for (std::size_t m = 0; m <= m2; ++m) out[m] = g[m];
}

std::vector<double> real_cepstrum(std::span<const double> magnitude) {
  const std::size_t bins = magnitude.size();
  if (bins < 2) throw std::invalid_argument("real_cepstrum: need at least 2 bins");
  const std::size_t n = 2 * (bins - 1);
  if (!is_power_of_two(n)) throw std::invalid_argument("real_cepstrum: fft size must be a power of two");

  std::vector<std::complex<double>> buf(n);
  for (std::size_t j = 0; j < bins; ++j) {
    double m = magnitude[j];
    if (!std::isfinite(m)) throw std::invalid_argument("real_cepstrum: non-finite magnitude");
    double l = std::log(std::max(m, kMagnitudeFloor));
    buf[j] = {l, 0.0};
    if (j > 0 && j < bins - 1) buf[n - j] = {l, 0.0};
  }
  fft_inplace(buf, true);
  std::vector<double> c(bins);
  for (std::size_t k = 0; k < bins; ++k) c[k] = buf[k].real();
  return c;
}

std::vector<double> mel_cepstrum_analysis(std::span<const double> magnitude, double alpha,
                                          std::size_t order) {
  if (alpha <= -1.0 || alpha >= 1.0)
    throw std::invalid_argument("mel_cepstrum_analysis: alpha must be in (-1, 1)");
  std::vector<double> c = real_cepstrum(magnitude);

  // to the one-sided sum convention: log|S| = b0 + sum_{k>=1} b_k cos(kw),
  // where the interior IDFT coefficients carry weight 2 and the Nyquist
  // term weight 1.
  std::vector<double> b(c.size());
  b[0] = c[0];
  for (std::size_t k = 1; k + 1 < c.size(); ++k) b[k] = 2.0 * c[k];
  b[c.size() - 1] = c[c.size() - 1];

  std::vector<double> warped(order + 1);
  freqt(b, alpha, warped);

  std::vector<double> mc(order + 1);
  mc[0] = warped[0];
  for (std::size_t k = 1; k <= order; ++k) mc[k] = 0.5 * warped[k];
  return mc;
}

}  // namespace vc::dsp
