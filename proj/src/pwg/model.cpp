#include "vc/pwg/model.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>

#include "vc/dsp/fft.hpp"
#include "vc/dsp/stft.hpp"

namespace vc::pwg {

using nn::Tape;
using nn::Tensor;
using nn::Var;

void VocoderConfig::validate() const {
  if (hop < 1) throw std::invalid_argument("VocoderConfig: hop must be >= 1");
  if (resolutions.empty()) throw std::invalid_argument("VocoderConfig: need >= 1 STFT resolution");
  if (phase_conditioning && logf0_channel >= cond_channels)
    throw std::invalid_argument("VocoderConfig: logf0_channel out of range");
  if (layers < 1 || dilation_cycles < 1 || layers % dilation_cycles != 0)
    throw std::invalid_argument("VocoderConfig: layers must divide into dilation cycles");
  if (disc_layers < 2) throw std::invalid_argument("VocoderConfig: discriminator needs >= 2 layers");
  if (kernel % 2 == 0 || disc_kernel % 2 == 0)
    throw std::invalid_argument("VocoderConfig: kernels must be odd");
  if (segment_frames < 1) throw std::invalid_argument("VocoderConfig: segment_frames must be >= 1");
}

std::size_t VocoderConfig::dilation_at(std::size_t layer) const {
  return static_cast<std::size_t>(1) << (layer % (layers / dilation_cycles));
}

std::size_t VocoderConfig::disc_receptive_field() const {
  const std::size_t cycle = std::max<std::size_t>(1, disc_layers / dilation_cycles);
  std::size_t rf = 1;
  for (std::size_t l = 0; l + 1 < disc_layers; ++l)
    rf += (disc_kernel - 1) * (static_cast<std::size_t>(1) << (l % cycle));
  return rf;
}

void AugmentedBatch::validate(const VocoderConfig& cfg) const {
  const std::size_t f = frames();
  if (waveform.size() != f * cfg.hop)
    throw std::invalid_argument("AugmentedBatch: waveform length must be frames * hop");
  if (natural.features.cols() != cfg.cond_channels)
    throw std::invalid_argument("AugmentedBatch: conditioning channel mismatch");
  if (natural.provenance != ConditioningSequence::Provenance::natural)
    throw std::invalid_argument("AugmentedBatch: first variant must be natural");
  if (reconstructed && reconstructed->frames() != f)
    throw std::invalid_argument("AugmentedBatch: reconstructed frame count mismatch");
  for (const auto& c : cyclic)
    if (c.frames() != f) throw std::invalid_argument("AugmentedBatch: cyclic frame count mismatch");
}

// ---------------------------------------------------------------- stft node

Var stft_magnitude_t(Tape& tp, Var wave, const StftResolution& res) {
  const Tensor& wv = tp.val(wave);
  const std::size_t t = wv.size();
  if (t == 0) throw std::invalid_argument("stft_magnitude: empty waveform");

  dsp::Waveform w;
  w.samples.assign(wv.data(), wv.data() + t);
  auto spec = std::make_shared<dsp::Spectrogram>(
      dsp::stft(w, res.fft_size, res.hop, res.win_length));

  Tensor mag({spec->frames, spec->bins});
  for (std::size_t i = 0; i < spec->v.size(); ++i) mag[i] = std::abs(spec->v[i]);

  StftResolution r = res;
  return tp.make_node(std::move(mag), {wave}, [wave, spec, r, t](Tape& tpp, const Tensor& g) {
    if (!tpp.needs_grad(wave)) return;
    Tensor& gw = tpp.grad_buf(wave);
    const std::size_t n = r.fft_size;
    const std::size_t pad = n / 2;
    const std::size_t off = (n - r.win_length) / 2;
    const std::vector<double> win = dsp::hann_window(r.win_length);
    std::vector<std::complex<double>> h(n);
    for (std::size_t f = 0; f < spec->frames; ++f) {
      std::fill(h.begin(), h.end(), std::complex<double>(0.0, 0.0));
      bool any = false;
      for (std::size_t b = 0; b < spec->bins; ++b) {
        double go = g[f * spec->bins + b];
        if (go == 0.0) continue;
        std::complex<double> x = spec->at(f, b);
        double m = std::abs(x);
        if (m < 1e-12) continue;
        h[b] = go * x / m;
        any = true;
      }
      if (!any) continue;
      dsp::fft_inplace(h, true);  // includes 1/n; undo below
      const std::ptrdiff_t base =
          static_cast<std::ptrdiff_t>(f * r.hop) - static_cast<std::ptrdiff_t>(pad);
      for (std::size_t j = 0; j < r.win_length; ++j) {
        double gt = h[off + j].real() * static_cast<double>(n);
        std::size_t src = dsp::reflect_index(base + static_cast<std::ptrdiff_t>(off + j), t);
        gw[src] += win[j] * gt;
      }
    }
  });
}

// ---------------------------------------------------------------- stft loss

namespace {
constexpr double kLogMagFloor = 1e-7;
}

MrStftTerms mr_stft_terms(const std::vector<double>& w, const std::vector<double>& w_hat,
                          const std::vector<StftResolution>& resolutions) {
  if (w.size() != w_hat.size()) throw std::invalid_argument("mr_stft: length mismatch");
  if (resolutions.empty()) throw std::invalid_argument("mr_stft: no resolutions");
  MrStftTerms out;
  dsp::Waveform a, b;
  a.samples = w;
  b.samples = w_hat;
  for (const auto& r : resolutions) {
    auto sa = dsp::stft(a, r.fft_size, r.hop, r.win_length);
    auto sb = dsp::stft(b, r.fft_size, r.hop, r.win_length);
    double num = 0.0, den = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < sa.v.size(); ++i) {
      double ma = std::abs(sa.v[i]);
      double mb = std::abs(sb.v[i]);
      num += (ma - mb) * (ma - mb);
      den += ma * ma;
      l1 += std::fabs(std::log(std::max(ma, kLogMagFloor)) -
                      std::log(std::max(mb, kLogMagFloor)));
    }
    double sc = den > 0.0 ? std::sqrt(num) / std::sqrt(den) : 0.0;
    double mag = l1 / static_cast<double>(sa.v.size());
    out.spectral_convergence.push_back(sc);
    out.log_magnitude.push_back(mag);
    out.total += (sc + mag) / static_cast<double>(resolutions.size());
  }
  return out;
}

double mr_stft_loss(const std::vector<double>& w, const std::vector<double>& w_hat,
                    const std::vector<StftResolution>& resolutions) {
  return mr_stft_terms(w, w_hat, resolutions).total;
}

Var Vocoder::mr_stft_loss_t(Tape& tp, const std::vector<double>& ref, Var w_hat) {
  if (ref.size() != tp.val(w_hat).size())
    throw std::invalid_argument("mr_stft: length mismatch");
  dsp::Waveform rw;
  rw.samples = ref;
  Var total;
  for (const auto& r : cfg_.resolutions) {
    auto sa = dsp::stft(rw, r.fft_size, r.hop, r.win_length);
    Tensor ref_mag({sa.frames, sa.bins});
    double den = 0.0;
    for (std::size_t i = 0; i < sa.v.size(); ++i) {
      ref_mag[i] = std::abs(sa.v[i]);
      den += ref_mag[i] * ref_mag[i];
    }
    Tensor ref_log(ref_mag.shape());
    for (std::size_t i = 0; i < ref_mag.size(); ++i)
      ref_log[i] = std::log(std::max(ref_mag[i], kLogMagFloor));

    Var mag = stft_magnitude_t(tp, w_hat, r);
    Var diff = tp.sub(mag, tp.constant(ref_mag));
    Var sc = tp.mul_scalar(tp.sqrt(tp.add_scalar(tp.sum(tp.square(diff)), 1e-20)),
                           den > 0.0 ? 1.0 / std::sqrt(den) : 0.0);
    Var lm = tp.mean(tp.abs(tp.sub(tp.log(tp.clamp_min(mag, kLogMagFloor)),
                                   tp.constant(ref_log))));
    Var res_loss = tp.add(sc, lm);
    total = total.valid() ? tp.add(total, res_loss) : res_loss;
  }
  return tp.mul_scalar(total, 1.0 / static_cast<double>(cfg_.resolutions.size()));
}

// ---------------------------------------------------------------- vocoder

Vocoder::Vocoder(VocoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  cond_mean_ = Tensor::zeros({cfg_.cond_channels});
  cond_std_ = Tensor::full({cfg_.cond_channels}, 1.0);
  nn::Rng rng(0);
  init_params(rng);
}

void Vocoder::init_params(nn::Rng& rng) {
  gen_ = nn::ParameterStore();
  disc_ = nn::ParameterStore();
  gen_steps_ = disc_steps_ = 0;
  const std::size_t cr = cfg_.residual_channels;
  const std::size_t cs = cfg_.skip_channels;
  const std::size_t cc = cfg_.upsampled_channels();
  const std::size_t k = cfg_.kernel;

  // the input layer sees noise and conditioning; the residual stream then
  // carries excitation-locked content instead of raw noise alone
  gen_.create("g.in.w", nn::uniform_init({1, cr, 1 + cc}, 1 + cc, rng));
  gen_.create("g.in.b", Tensor::zeros({cr}));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    std::string p = "g.l" + std::to_string(l);
    gen_.create(p + ".conv.w", nn::uniform_init({k, 2 * cr, cr}, cr * k, rng));
    gen_.create(p + ".conv.b", Tensor::zeros({2 * cr}));
    gen_.create(p + ".cond.w", nn::uniform_init({1, 2 * cr, cc}, cc, rng));
    gen_.create(p + ".cond.b", Tensor::zeros({2 * cr}));
    gen_.create(p + ".res.w", nn::uniform_init({1, cr, cr}, cr, rng));
    gen_.create(p + ".res.b", Tensor::zeros({cr}));
    gen_.create(p + ".skip.w", nn::uniform_init({1, cs, cr}, cr, rng));
    gen_.create(p + ".skip.b", Tensor::zeros({cs}));
  }
  gen_.create("g.out1.w", nn::uniform_init({1, cs, cs}, cs, rng));
  gen_.create("g.out1.b", Tensor::zeros({cs}));
  gen_.create("g.out2.w", nn::uniform_init({1, 1, cs}, cs, rng));
  gen_.create("g.out2.b", Tensor::zeros({1}));
  // learnable output gain, quiet start: the waveform fades in from
  // near-silence without pinning the conv weights small
  gen_.create("g.out_gain", Tensor({1}, {1e-3}));

  const std::size_t dc = cfg_.disc_channels;
  const std::size_t dk = cfg_.disc_kernel;
  for (std::size_t l = 0; l + 1 < cfg_.disc_layers; ++l) {
    std::string p = "d.l" + std::to_string(l);
    std::size_t in_ch = l == 0 ? 1 : dc;
    disc_.create(p + ".w", nn::uniform_init({dk, dc, in_ch}, in_ch * dk, rng));
    disc_.create(p + ".b", Tensor::zeros({dc}));
  }
  disc_.create("d.out.w", nn::uniform_init({1, 1, dc}, dc, rng));
  disc_.create("d.out.b", Tensor::zeros({1}));
}

void Vocoder::set_cond_stats(Tensor mean, Tensor std) {
  if (mean.size() != cfg_.cond_channels || std.size() != cfg_.cond_channels)
    throw std::invalid_argument("set_cond_stats: channel mismatch");
  for (std::size_t i = 0; i < std.size(); ++i)
    if (std[i] <= 0.0) throw std::invalid_argument("set_cond_stats: std must be > 0");
  cond_mean_ = std::move(mean);
  cond_std_ = std::move(std);
}

Tensor Vocoder::upsample_conditioning(const Tensor& features) const {
  if (features.cols() != cfg_.cond_channels)
    throw std::invalid_argument("upsample_conditioning: channel mismatch");
  const std::size_t f = features.rows();
  const double twopi = 6.28318530717958647692;
  Tensor up({f * cfg_.hop, cfg_.upsampled_channels()});
  double phase = 0.0;
  for (std::size_t r = 0; r < f; ++r) {
    const double* src = features.row_ptr(r);
    double f0 = cfg_.phase_conditioning ? std::exp(src[cfg_.logf0_channel]) : 0.0;
    for (std::size_t j = 0; j < cfg_.hop; ++j) {
      double* dst = up.row_ptr(r * cfg_.hop + j);
      for (std::size_t c = 0; c < cfg_.cond_channels; ++c)
        dst[c] = (src[c] - cond_mean_[c]) / cond_std_[c];
      if (cfg_.phase_conditioning) {
        phase += f0 / static_cast<double>(cfg_.sample_rate);
        if (phase >= 1.0) phase -= 1.0;
        dst[cfg_.cond_channels] = std::sin(twopi * phase);
        dst[cfg_.cond_channels + 1] = std::cos(twopi * phase);
      }
    }
  }
  return up;
}

Var Vocoder::generator_t(Tape& tp, const Tensor& noise, const Tensor& cond_up,
                         bool train_params) {
  const std::size_t t = noise.size();
  if (cond_up.rows() != t || cond_up.cols() != cfg_.upsampled_channels())
    throw std::invalid_argument("generator: conditioning length mismatch");
  auto P = [&](const std::string& name) {
    return train_params ? tp.param(gen_, name) : tp.constant(gen_.entry(name).value);
  };
  Var cond = tp.constant(cond_up);
  Var noise_col =
      tp.constant(Tensor({t, 1}, std::vector<double>(noise.data(), noise.data() + t)));
  Var x = tp.conv1d(tp.concat_cols(noise_col, cond), P("g.in.w"), P("g.in.b"), 1, false);
  Var skips;
  const std::size_t cr = cfg_.residual_channels;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    std::string p = "g.l" + std::to_string(l);
    Var gated = tp.conv1d(x, P(p + ".conv.w"), P(p + ".conv.b"), cfg_.dilation_at(l), false);
    Var cv = tp.conv1d(cond, P(p + ".cond.w"), P(p + ".cond.b"), 1, false);
    Var pre = tp.add(gated, cv);
    Var filt = tp.tanh(tp.slice_cols(pre, 0, cr));
    Var gate = tp.sigmoid(tp.slice_cols(pre, cr, 2 * cr));
    Var z = tp.mul(filt, gate);
    Var res = tp.conv1d(z, P(p + ".res.w"), P(p + ".res.b"), 1, false);
    x = tp.mul_scalar(tp.add(x, res), M_SQRT1_2);
    Var sk = tp.conv1d(z, P(p + ".skip.w"), P(p + ".skip.b"), 1, false);
    skips = skips.valid() ? tp.add(skips, sk) : sk;
  }
  Var h = tp.mul_scalar(skips, 1.0 / std::sqrt(static_cast<double>(cfg_.layers)));
  h = tp.conv1d(tp.leaky_relu(h, cfg_.leaky_slope), P("g.out1.w"), P("g.out1.b"), 1, false);
  h = tp.conv1d(tp.leaky_relu(h, cfg_.leaky_slope), P("g.out2.w"), P("g.out2.b"), 1, false);
  return tp.tanh(tp.scale_by(h, P("g.out_gain")));  // [T x 1], squashed into (-1, 1)
}

Var Vocoder::discriminator_t(Tape& tp, Var wave_col, bool train_params) {
  auto P = [&](const std::string& name) {
    return train_params ? tp.param(disc_, name) : tp.constant(disc_.entry(name).value);
  };
  const std::size_t cycle = std::max<std::size_t>(1, cfg_.disc_layers / cfg_.dilation_cycles);
  Var x = wave_col;
  for (std::size_t l = 0; l + 1 < cfg_.disc_layers; ++l) {
    std::string p = "d.l" + std::to_string(l);
    std::size_t dil = static_cast<std::size_t>(1) << (l % cycle);
    x = tp.leaky_relu(tp.conv1d(x, P(p + ".w"), P(p + ".b"), dil, false), cfg_.leaky_slope);
  }
  return tp.conv1d(x, P("d.out.w"), P("d.out.b"), 1, false);  // unbounded scores
}

std::vector<double> Vocoder::generator_forward(const std::vector<double>& noise,
                                               const ConditioningSequence& cond) {
  if (noise.size() != cond.frames() * cfg_.hop)
    throw std::invalid_argument("generator_forward: noise length must be frames * hop");
  Tape tp;
  Tensor nz({noise.size()}, std::vector<double>(noise));
  Var y = generator_t(tp, nz, upsample_conditioning(cond.features), false);
  const Tensor& v = tp.val(y);
  return {v.data(), v.data() + v.size()};
}

std::vector<double> Vocoder::discriminator_forward(const std::vector<double>& wave) {
  if (wave.size() < cfg_.disc_receptive_field())
    throw std::invalid_argument("discriminator_forward: input shorter than receptive field");
  Tape tp;
  Var y = discriminator_t(tp, tp.constant(Tensor({wave.size(), 1}, std::vector<double>(wave))),
                          false);
  const Tensor& v = tp.val(y);
  return {v.data(), v.data() + v.size()};
}

Vocoder::GenLossReport Vocoder::generator_loss_t(Tape& tp, const AugmentedBatch& batch,
                                                 bool adversarial, nn::Rng& rng, Var* total_out) {
  batch.validate(cfg_);
  const std::size_t t = batch.waveform.size();

  std::vector<const ConditioningSequence*> variants;
  variants.push_back(&batch.natural);
  if (batch.reconstructed) variants.push_back(&*batch.reconstructed);
  for (const auto& c : batch.cyclic) variants.push_back(&c);

  GenLossReport rep;
  Var stft_sum, adv_sum;
  for (const ConditioningSequence* cond : variants) {
    Tensor noise = nn::sample_gaussian({t}, rng);
    Var w_hat = generator_t(tp, noise, upsample_conditioning(cond->features), true);
    Var stft = mr_stft_loss_t(tp, batch.waveform, w_hat);
    rep.stft_terms.push_back(tp.val(stft)[0]);
    stft_sum = stft_sum.valid() ? tp.add(stft_sum, stft) : stft;
    if (adversarial) {
      Var d = discriminator_t(tp, w_hat, false);
      Var adv = tp.mean(tp.square(tp.add_scalar(tp.neg(d), 1.0)));
      rep.adv_terms.push_back(tp.val(adv)[0]);
      adv_sum = adv_sum.valid() ? tp.add(adv_sum, adv) : adv;
    }
  }
  const double inv_v = 1.0 / static_cast<double>(variants.size());
  Var total = tp.mul_scalar(stft_sum, inv_v);
  rep.stft = tp.val(total)[0];
  if (adversarial) {
    Var adv_mean = tp.mul_scalar(adv_sum, inv_v);
    rep.adv = tp.val(adv_mean)[0];
    total = tp.add(total, tp.mul_scalar(adv_mean, cfg_.lambda_adv));
  }
  rep.total = tp.val(total)[0];
  if (total_out) *total_out = total;
  return rep;
}

Vocoder::GenLossReport Vocoder::generator_loss(const AugmentedBatch& batch, bool adversarial,
                                               nn::Rng& rng) {
  Tape tp;
  return generator_loss_t(tp, batch, adversarial, rng, nullptr);
}

Vocoder::DiscLossReport Vocoder::discriminator_loss_t(Tape& tp, const AugmentedBatch& batch,
                                                      bool pretrain, nn::Rng& rng,
                                                      Var* total_out) {
  if (pretrain)
    throw std::logic_error("discriminator_loss: called during pretrain stage");
  batch.validate(cfg_);
  const std::size_t t = batch.waveform.size();

  DiscLossReport rep;
  Var real_wave = tp.constant(Tensor({t, 1}, std::vector<double>(batch.waveform)));
  Var d_real = discriminator_t(tp, real_wave, true);
  Var real_term = tp.mean(tp.square(tp.add_scalar(tp.neg(d_real), 1.0)));
  rep.real = tp.val(real_term)[0];

  std::vector<const ConditioningSequence*> variants;
  variants.push_back(&batch.natural);
  if (batch.reconstructed) variants.push_back(&*batch.reconstructed);
  for (const auto& c : batch.cyclic) variants.push_back(&c);

  Var fake_sum;
  for (const ConditioningSequence* cond : variants) {
    // fresh noise, detached from generator gradients
    Tensor noise = nn::sample_gaussian({t}, rng);
    Tape gen_tape;
    Var fake = generator_t(gen_tape, noise, upsample_conditioning(cond->features), false);
    const Tensor& fv = gen_tape.val(fake);
    Var d_fake = discriminator_t(
        tp, tp.constant(Tensor({t, 1}, std::vector<double>(fv.data(), fv.data() + fv.size()))),
        true);
    Var term = tp.mean(tp.square(d_fake));
    fake_sum = fake_sum.valid() ? tp.add(fake_sum, term) : term;
  }
  Var fake_mean = tp.mul_scalar(fake_sum, 1.0 / static_cast<double>(variants.size()));
  rep.fake = tp.val(fake_mean)[0];
  Var total = tp.add(real_term, fake_mean);
  rep.total = tp.val(total)[0];
  if (total_out) *total_out = total;
  return rep;
}

Vocoder::DiscLossReport Vocoder::discriminator_loss(const AugmentedBatch& batch, bool pretrain,
                                                    nn::Rng& rng) {
  Tape tp;
  return discriminator_loss_t(tp, batch, pretrain, rng, nullptr);
}

AugmentedBatch Vocoder::crop_batch(const AugmentedBatch& batch, nn::Rng& rng) const {
  const std::size_t f = batch.frames();
  if (f <= cfg_.segment_frames) return batch;
  const std::size_t start = rng.below(f - cfg_.segment_frames + 1);
  const std::size_t end = start + cfg_.segment_frames;

  auto crop_cond = [&](const ConditioningSequence& c) {
    ConditioningSequence out;
    out.provenance = c.provenance;
    out.pivot = c.pivot;
    out.features = Tensor({cfg_.segment_frames, c.features.cols()});
    std::copy(c.features.row_ptr(start), c.features.row_ptr(end), out.features.data());
    return out;
  };
  AugmentedBatch out;
  out.waveform.assign(batch.waveform.begin() + start * cfg_.hop,
                      batch.waveform.begin() + end * cfg_.hop);
  out.natural = crop_cond(batch.natural);
  if (batch.reconstructed) out.reconstructed = crop_cond(*batch.reconstructed);
  for (const auto& c : batch.cyclic) out.cyclic.push_back(crop_cond(c));
  return out;
}

Vocoder::StepReport Vocoder::train_step(const AugmentedBatch& batch, std::size_t step_index,
                                        nn::Rng& rng) {
  batch.validate(cfg_);
  AugmentedBatch crop = crop_batch(batch, rng);
  StepReport rep;
  rep.adversarial = step_index >= cfg_.pretrain_steps;

  auto warm = [&](double lr, std::uint64_t opt_step) {
    if (cfg_.lr_warmup_steps == 0 || opt_step >= cfg_.lr_warmup_steps) return lr;
    return lr * static_cast<double>(opt_step + 1) / static_cast<double>(cfg_.lr_warmup_steps);
  };
  nn::AdamConfig gen_adam;
  gen_adam.lr = warm(cfg_.lr_gen, gen_steps_);
  nn::AdamConfig disc_adam;
  disc_adam.lr = warm(cfg_.lr_disc, disc_steps_);

  if (rep.adversarial) {
    Tape dt;
    Var d_total;
    DiscLossReport dl = discriminator_loss_t(dt, crop, false, rng, &d_total);
    dt.backward(d_total);
    disc_.clip_grad_norm(cfg_.grad_clip);
    adam_step(disc_, disc_adam, disc_steps_);
    rep.loss_d = dl.total;
  }

  Tape gt;
  Var g_total;
  GenLossReport gl = generator_loss_t(gt, crop, rep.adversarial, rng, &g_total);
  gt.backward(g_total);
  gen_.clip_grad_norm(cfg_.grad_clip);
  adam_step(gen_, gen_adam, gen_steps_);
  rep.stft = gl.stft;
  rep.adv_g = gl.adv;
  return rep;
}

dsp::Waveform Vocoder::synthesize(const ConditioningSequence& cond, nn::Rng& rng) {
  const std::size_t t = cond.frames() * cfg_.hop;
  Tensor noise = nn::sample_gaussian({t}, rng);
  std::vector<double> samples =
      generator_forward({noise.data(), noise.data() + t}, cond);
  dsp::Waveform w;
  w.sample_rate = cfg_.sample_rate;
  w.samples = std::move(samples);
  return w;
}

}  // namespace vc::pwg
