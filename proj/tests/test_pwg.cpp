#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "support/gradcheck.hpp"
#include "vc/pwg/model.hpp"

using namespace vc;
using pwg::AugmentedBatch;
using pwg::ConditioningSequence;
using pwg::StftResolution;
using pwg::Vocoder;
using pwg::VocoderConfig;

namespace {

constexpr double kPi = 3.14159265358979323846;

VocoderConfig tiny_config() {
  VocoderConfig cfg;
  cfg.hop = 4;
  cfg.cond_channels = 2;
  cfg.logf0_channel = 0;
  cfg.residual_channels = 2;
  cfg.skip_channels = 2;
  cfg.layers = 2;
  cfg.dilation_cycles = 1;
  cfg.kernel = 3;
  cfg.disc_layers = 3;
  cfg.disc_channels = 2;
  cfg.disc_kernel = 3;
  cfg.resolutions = {{16, 4, 8}, {32, 8, 16}};
  cfg.segment_frames = 4;
  cfg.pretrain_steps = 3;
  cfg.adversarial_steps = 3;
  return cfg;
}

ConditioningSequence random_cond(std::size_t frames, std::size_t channels, nn::Rng& rng,
                                 ConditioningSequence::Provenance prov =
                                     ConditioningSequence::Provenance::natural) {
  ConditioningSequence c;
  c.provenance = prov;
  c.features = nn::Tensor({frames, channels});
  for (std::size_t i = 0; i < c.features.size(); ++i)
    c.features[i] = 2.0 * rng.uniform01() - 1.0;
  return c;
}

AugmentedBatch random_batch(const VocoderConfig& cfg, std::size_t frames, nn::Rng& rng,
                            bool with_variants) {
  AugmentedBatch b;
  b.waveform.resize(frames * cfg.hop);
  for (auto& s : b.waveform) s = 0.6 * std::sin(0.3 * static_cast<double>(&s - b.waveform.data())) +
                                 0.1 * (2.0 * rng.uniform01() - 1.0);
  b.natural = random_cond(frames, cfg.cond_channels, rng);
  if (with_variants) {
    b.reconstructed = random_cond(frames, cfg.cond_channels, rng,
                                  ConditioningSequence::Provenance::reconstructed);
    b.cyclic.push_back(
        random_cond(frames, cfg.cond_channels, rng, ConditioningSequence::Provenance::cyclic));
  }
  return b;
}

void zero_store(nn::ParameterStore& ps) {
  for (auto& [k, e] : ps.entries()) e.value.fill(0.0);
}

// test-local scalar convolution, cross-correlation convention
std::vector<double> conv_ref(const std::vector<double>& x, std::size_t t, std::size_t in,
                             const nn::Tensor& w, const nn::Tensor& b, std::size_t dil) {
  std::size_t k = w.dim(0), out = w.dim(1);
  std::ptrdiff_t center = static_cast<std::ptrdiff_t>((k - 1) / 2);
  std::vector<double> y(t * out);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t kk = 0; kk < k; ++kk) {
        std::ptrdiff_t s = static_cast<std::ptrdiff_t>(r) +
                           (static_cast<std::ptrdiff_t>(kk) - center) * static_cast<std::ptrdiff_t>(dil);
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(t)) continue;
        for (std::size_t i = 0; i < in; ++i)
          acc += w[kk * out * in + o * in + i] * x[s * in + i];
      }
      y[r * out + o] = acc;
    }
  return y;
}

}  // namespace

TEST_CASE("zero-parameter generator emits the squashed output bias") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  zero_store(voc.gen_params());
  voc.gen_params().entry("g.out2.b").value[0] = 0.7;
  voc.gen_params().entry("g.out_gain").value[0] = 1.0;
  nn::Rng rng(1);
  auto cond = random_cond(5, cfg.cond_channels, rng);
  std::vector<double> noise(5 * cfg.hop, 0.3);
  auto y = voc.generator_forward(noise, cond);
  REQUIRE(y.size() == noise.size());
  for (double v : y) CHECK(v == doctest::Approx(std::tanh(0.7)).epsilon(1e-12));
}

TEST_CASE("generator output length contract and bounds") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  nn::Rng rng(2);
  for (std::size_t frames : {1u, 3u, 17u}) {
    auto cond = random_cond(frames, cfg.cond_channels, rng);
    dsp::Waveform w = voc.synthesize(cond, rng);
    CHECK(w.samples.size() == frames * cfg.hop);
    for (double v : w.samples) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
  // wrong noise length
  auto cond = random_cond(4, cfg.cond_channels, rng);
  std::vector<double> bad(13, 0.0);
  CHECK_THROWS(voc.generator_forward(bad, cond));
}

TEST_CASE("synthesize is deterministic under a fixed seed") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  nn::Rng r1(77), r2(77), rc(5);
  auto cond = random_cond(6, cfg.cond_channels, rc);
  auto a = voc.synthesize(cond, r1);
  auto b = voc.synthesize(cond, r2);
  CHECK(a.samples == b.samples);
}

TEST_CASE("generator matches a scalar reference forward pass") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  nn::Rng rng(3);
  const std::size_t frames = 3, t = frames * cfg.hop;
  auto cond = random_cond(frames, cfg.cond_channels, rng);
  std::vector<double> noise(t);
  for (auto& v : noise) v = 2.0 * rng.uniform01() - 1.0;
  auto got = voc.generator_forward(noise, cond);

  // scalar route
  const auto& ps = voc.gen_params();
  nn::Tensor up = voc.upsample_conditioning(cond.features);
  std::vector<double> upv(up.data(), up.data() + up.size());
  const std::size_t cr = cfg.residual_channels, cs = cfg.skip_channels;
  std::vector<double> xin(t * (1 + cfg.upsampled_channels()));
  for (std::size_t r = 0; r < t; ++r) {
    xin[r * (1 + cfg.upsampled_channels())] = noise[r];
    for (std::size_t c = 0; c < cfg.upsampled_channels(); ++c)
      xin[r * (1 + cfg.upsampled_channels()) + 1 + c] = upv[r * cfg.upsampled_channels() + c];
  }
  std::vector<double> x = conv_ref(xin, t, 1 + cfg.upsampled_channels(),
                                   ps.entry("g.in.w").value, ps.entry("g.in.b").value, 1);
  std::vector<double> skips(t * cs, 0.0);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string p = "g.l" + std::to_string(l);
    auto gated = conv_ref(x, t, cr, ps.entry(p + ".conv.w").value, ps.entry(p + ".conv.b").value,
                          cfg.dilation_at(l));
    auto cv = conv_ref(upv, t, cfg.upsampled_channels(), ps.entry(p + ".cond.w").value,
                       ps.entry(p + ".cond.b").value, 1);
    std::vector<double> z(t * cr);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < cr; ++c) {
        double f = std::tanh(gated[r * 2 * cr + c] + cv[r * 2 * cr + c]);
        double g = 1.0 / (1.0 + std::exp(-(gated[r * 2 * cr + cr + c] + cv[r * 2 * cr + cr + c])));
        z[r * cr + c] = f * g;
      }
    auto res = conv_ref(z, t, cr, ps.entry(p + ".res.w").value, ps.entry(p + ".res.b").value, 1);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] + res[i]) * M_SQRT1_2;
    auto sk = conv_ref(z, t, cr, ps.entry(p + ".skip.w").value, ps.entry(p + ".skip.b").value, 1);
    for (std::size_t i = 0; i < skips.size(); ++i) skips[i] += sk[i];
  }
  auto lrelu = [&](double v) { return v > 0.0 ? v : cfg.leaky_slope * v; };
  for (auto& v : skips) v = lrelu(v / std::sqrt(static_cast<double>(cfg.layers)));
  auto h = conv_ref(skips, t, cs, ps.entry("g.out1.w").value, ps.entry("g.out1.b").value, 1);
  for (auto& v : h) v = lrelu(v);
  auto y = conv_ref(h, t, cs, ps.entry("g.out2.w").value, ps.entry("g.out2.b").value, 1);
  double gain = ps.entry("g.out_gain").value[0];
  for (std::size_t i = 0; i < t; ++i)
    CHECK(got[i] == doctest::Approx(std::tanh(gain * y[i])).epsilon(1e-12));
}

TEST_CASE("zero-parameter discriminator emits its bias with full length") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  zero_store(voc.disc_params());
  voc.disc_params().entry("d.out.b").value[0] = -0.4;
  std::vector<double> wave(50, 0.2);
  auto scores = voc.discriminator_forward(wave);
  REQUIRE(scores.size() == wave.size());
  for (double s : scores) CHECK(s == doctest::Approx(-0.4));

  std::vector<double> tiny(cfg.disc_receptive_field() - 1, 0.0);
  CHECK_THROWS(voc.discriminator_forward(tiny));
}

TEST_CASE("discriminator matches a scalar reference forward pass") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  nn::Rng rng(9);
  const std::size_t t = 24;
  std::vector<double> wave(t);
  for (auto& v : wave) v = 2.0 * rng.uniform01() - 1.0;
  auto got = voc.discriminator_forward(wave);

  const auto& ps = voc.disc_params();
  const std::size_t cycle = std::max<std::size_t>(1, cfg.disc_layers / cfg.dilation_cycles);
  std::vector<double> x = wave;
  std::size_t in = 1;
  for (std::size_t l = 0; l + 1 < cfg.disc_layers; ++l) {
    std::string p = "d.l" + std::to_string(l);
    auto y = conv_ref(x, t, in, ps.entry(p + ".w").value, ps.entry(p + ".b").value,
                      static_cast<std::size_t>(1) << (l % cycle));
    for (auto& v : y) v = v > 0.0 ? v : cfg.leaky_slope * v;
    x = y;
    in = cfg.disc_channels;
  }
  auto y = conv_ref(x, t, in, ps.entry("d.out.w").value, ps.entry("d.out.b").value, 1);
  for (std::size_t i = 0; i < t; ++i) CHECK(got[i] == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("mr-stft loss basic values") {
  std::vector<StftResolution> res = {{64, 16, 32}, {128, 32, 64}};
  std::vector<double> w(300);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.7 * std::sin(2.0 * kPi * 0.05 * i);

  CHECK(pwg::mr_stft_loss(w, w, res) == 0.0);

  // silence prediction: spectral convergence is exactly 1 per resolution
  std::vector<double> silent(w.size(), 0.0);
  auto terms = pwg::mr_stft_terms(w, silent, res);
  for (double sc : terms.spectral_convergence) CHECK(sc == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> wrong(100, 0.0);
  CHECK_THROWS(pwg::mr_stft_loss(w, wrong, res));
}

TEST_CASE("mr-stft loss nonnegative and sign-flip invariant") {
  std::vector<StftResolution> res = {{64, 16, 32}};
  nn::Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(200), b(200);
    for (auto& v : a) v = 2.0 * rng.uniform01() - 1.0;
    for (auto& v : b) v = 2.0 * rng.uniform01() - 1.0;
    double l = pwg::mr_stft_loss(a, b, res);
    CHECK(l >= 0.0);
    std::vector<double> an(a), bn(b);
    for (auto& v : an) v = -v;
    for (auto& v : bn) v = -v;
    CHECK(pwg::mr_stft_loss(an, bn, res) == doctest::Approx(l).epsilon(1e-12));
  }
}

TEST_CASE("mr-stft loss matches an independent direct-DFT reimplementation") {
  // straightforward reimplementation: explicit O(N^2) DFT, same definitions
  auto direct_loss = [](const std::vector<double>& w, const std::vector<double>& w_hat,
                        const std::vector<StftResolution>& res) {
    auto mags = [](const std::vector<double>& x, const StftResolution& r) {
      std::size_t frames = (x.size() + r.hop - 1) / r.hop;
      std::size_t bins = r.fft_size / 2 + 1;
      std::vector<double> win(r.win_length);
      for (std::size_t i = 0; i < r.win_length; ++i)
        win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / r.win_length);
      auto reflect = [&](std::ptrdiff_t i) {
        std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
        while (i < 0 || i >= n) {
          if (i < 0) i = -i;
          if (i >= n) i = 2 * (n - 1) - i;
        }
        return static_cast<std::size_t>(i);
      };
      std::vector<double> out(frames * bins);
      std::size_t off = (r.fft_size - r.win_length) / 2;
      for (std::size_t f = 0; f < frames; ++f) {
        std::vector<double> frame(r.fft_size, 0.0);
        std::ptrdiff_t base = static_cast<std::ptrdiff_t>(f * r.hop) -
                              static_cast<std::ptrdiff_t>(r.fft_size / 2);
        for (std::size_t j = 0; j < r.win_length; ++j)
          frame[off + j] = x[reflect(base + static_cast<std::ptrdiff_t>(off + j))] * win[j];
        for (std::size_t k = 0; k < bins; ++k) {
          std::complex<double> acc{0.0, 0.0};
          for (std::size_t n = 0; n < r.fft_size; ++n) {
            double ang = -2.0 * kPi * static_cast<double>(k * n) / r.fft_size;
            acc += frame[n] * std::complex<double>(std::cos(ang), std::sin(ang));
          }
          out[f * bins + k] = std::abs(acc);
        }
      }
      return out;
    };
    double total = 0.0;
    for (const auto& r : res) {
      auto ma = mags(w, r), mb = mags(w_hat, r);
      double num = 0.0, den = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i < ma.size(); ++i) {
        num += (ma[i] - mb[i]) * (ma[i] - mb[i]);
        den += ma[i] * ma[i];
        l1 += std::fabs(std::log(std::max(ma[i], 1e-7)) - std::log(std::max(mb[i], 1e-7)));
      }
      total += (std::sqrt(num) / std::sqrt(den) + l1 / ma.size()) / res.size();
    }
    return total;
  };

  std::vector<StftResolution> res = {{32, 8, 16}, {64, 16, 32}};
  nn::Rng rng(14);
  std::vector<double> a(150), b(150);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = 0.6 * std::sin(2.0 * kPi * 0.03 * i);
    b[i] = a[i] + 0.2 * (2.0 * rng.uniform01() - 1.0);
  }
  CHECK(pwg::mr_stft_loss(a, b, res) == doctest::Approx(direct_loss(a, b, res)).epsilon(1e-10));
}

TEST_CASE("generator loss term counts follow the augmentation") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  nn::Rng rng(4);
  // full augmentation: natural + reconstructed + 1 cyclic pivot
  AugmentedBatch full = random_batch(cfg, 5, rng, true);
  nn::Rng lr(1);
  auto rep = voc.generator_loss(full, true, lr);
  CHECK(rep.stft_terms.size() == 3);  // 2 + P with P = 1
  CHECK(rep.adv_terms.size() == 3);

  // degenerate augmentation reduces to the two-term baseline
  AugmentedBatch bare = random_batch(cfg, 5, rng, false);
  nn::Rng lr2(1);
  auto rep2 = voc.generator_loss(bare, true, lr2);
  CHECK(rep2.stft_terms.size() == 1);
  CHECK(rep2.adv_terms.size() == 1);

  nn::Rng lr3(1);
  auto rep3 = voc.generator_loss(bare, false, lr3);
  CHECK(rep3.adv_terms.empty());
  CHECK(rep3.adv == 0.0);
}

TEST_CASE("adversarial terms against a hand-set discriminator") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  zero_store(voc.disc_params());  // D outputs constant 0
  nn::Rng rng(8);
  AugmentedBatch batch = random_batch(cfg, 5, rng, true);
  nn::Rng lr(2);
  auto rep = voc.generator_loss(batch, true, lr);
  for (double adv : rep.adv_terms) CHECK(adv == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.total == doctest::Approx(rep.stft + cfg.lambda_adv * 1.0).epsilon(1e-9));
}

TEST_CASE("discriminator loss at hand-set outputs") {
  VocoderConfig cfg = tiny_config();
  nn::Rng rng(10);
  AugmentedBatch batch = random_batch(cfg, 5, rng, false);

  // D == 0: loss = (1-0)^2 + 0^2 = 1
  {
    Vocoder voc(cfg);
    zero_store(voc.disc_params());
    nn::Rng lr(3);
    auto rep = voc.discriminator_loss(batch, false, lr);
    CHECK(rep.total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.real == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.fake == doctest::Approx(0.0).epsilon(1e-12));
  }
  // D == 1: loss = 0 + 1 = 1
  {
    Vocoder voc(cfg);
    zero_store(voc.disc_params());
    voc.disc_params().entry("d.out.b").value[0] = 1.0;
    nn::Rng lr(3);
    auto rep = voc.discriminator_loss(batch, false, lr);
    CHECK(rep.total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.real == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rep.fake == doctest::Approx(1.0).epsilon(1e-12));
  }
  // calling during pretrain is an error
  {
    Vocoder voc(cfg);
    nn::Rng lr(3);
    CHECK_THROWS_AS(voc.discriminator_loss(batch, true, lr), std::logic_error);
  }
}

TEST_CASE("generator gradients match finite differences") {
  VocoderConfig cfg = tiny_config();
  cfg.layers = 2;
  cfg.resolutions = {{16, 4, 8}};
  Vocoder voc(cfg);
  nn::Rng rng(11);
  // the quiet gain sits below the STFT magnitude guard; check the math at
  // a generic operating point instead
  voc.gen_params().entry("g.out_gain").value[0] = 1.0;
  AugmentedBatch batch = random_batch(cfg, 3, rng, true);

  for (bool adversarial : {false, true}) {
    auto loss = [&](bool acc) {
      nn::Tape tp;
      nn::Var total;
      nn::Rng lr(123);  // same noise every evaluation
      auto rep = voc.generator_loss_t(tp, batch, adversarial, lr, &total);
      if (acc) tp.backward(total);
      return rep.total;
    };
    auto res = vc::testsupport::gradcheck(voc.gen_params(), loss);
    INFO("adversarial=" << adversarial << " worst=" << res.worst);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("discriminator gradients match finite differences") {
  VocoderConfig cfg = tiny_config();
  Vocoder voc(cfg);
  nn::Rng rng(12);
  AugmentedBatch batch = random_batch(cfg, 3, rng, false);
  auto loss = [&](bool acc) {
    nn::Tape tp;
    nn::Var total;
    nn::Rng lr(321);
    auto rep = voc.discriminator_loss_t(tp, batch, false, lr, &total);
    if (acc) tp.backward(total);
    return rep.total;
  };
  auto res = vc::testsupport::gradcheck(voc.disc_params(), loss);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("pretrain steps leave the discriminator untouched") {
  VocoderConfig cfg = tiny_config();
  cfg.pretrain_steps = 2;
  Vocoder voc(cfg);
  nn::Rng rng(13);
  AugmentedBatch batch = random_batch(cfg, 6, rng, true);

  std::map<std::string, std::vector<double>> before;
  for (auto& [k, e] : voc.disc_params().entries()) before[k] = e.value.values();

  nn::Rng tr(5);
  auto r0 = voc.train_step(batch, 0, tr);
  CHECK(!r0.adversarial);
  auto r1 = voc.train_step(batch, 1, tr);
  CHECK(!r1.adversarial);
  for (auto& [k, e] : voc.disc_params().entries()) CHECK(e.value.values() == before[k]);

  // boundary: adversarial terms activate exactly at pretrain_steps
  auto r2 = voc.train_step(batch, 2, tr);
  CHECK(r2.adversarial);
  CHECK(std::isfinite(r2.loss_d));
  bool changed = false;
  for (auto& [k, e] : voc.disc_params().entries())
    if (e.value.values() != before[k]) changed = true;
  CHECK(changed);
}

TEST_CASE("vocoder training trajectory is deterministic") {
  VocoderConfig cfg = tiny_config();
  auto run = [&]() {
    Vocoder voc(cfg);
    nn::Rng init(55);
    voc.init_params(init);
    nn::Rng dat(66);
    AugmentedBatch batch = random_batch(cfg, 6, dat, true);
    nn::Rng tr(7);
    std::vector<double> losses;
    for (std::size_t i = 0; i < 5; ++i) losses.push_back(voc.train_step(batch, i, tr).stft);
    return losses;
  };
  CHECK(run() == run());
}
