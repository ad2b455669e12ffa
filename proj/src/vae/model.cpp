#include "vc/vae/model.hpp"

#include <cmath>
#include <stdexcept>

namespace vc::vae {

using nn::Tape;
using nn::Tensor;
using nn::Var;

SpeakerCode::SpeakerCode(std::size_t idx, std::size_t n) : index(idx), count(n) {
  if (n < 1 || idx >= n) throw std::invalid_argument("SpeakerCode: index out of range");
}

Tensor SpeakerCode::one_hot() const {
  Tensor t({count});
  t[index] = 1.0;
  return t;
}

Tensor SpeakerCode::one_hot_rows(std::size_t frames) const {
  Tensor t({frames, count});
  for (std::size_t r = 0; r < frames; ++r) t.at(r, index) = 1.0;
  return t;
}

void ModelConfig::validate() const {
  if (n_cycles < 1) throw std::invalid_argument("ModelConfig: n_cycles must be >= 1");
  if (n_speakers < 2) throw std::invalid_argument("ModelConfig: need at least 2 speakers");
  if (mcep_dim < 2 || latent_dim < 1 || hidden < 1 || conv_channels < 1)
    throw std::invalid_argument("ModelConfig: bad dimensions");
}

Tensor feature_matrix(const dsp::AcousticFrameSequence& seq) {
  const std::size_t t = seq.frames();
  const std::size_t d = seq.feature_dim();
  Tensor m({t, d});
  for (std::size_t r = 0; r < t; ++r) {
    double* row = m.row_ptr(r);
    auto mc = seq.mcep_frame(r);
    std::copy(mc.begin(), mc.end(), row);
    row[seq.mcep_dim] = seq.log_f0[r];
    row[seq.mcep_dim + 1] = static_cast<double>(seq.uv[r]);
    auto ap = seq.ap_frame(r);
    std::copy(ap.begin(), ap.end(), row + seq.mcep_dim + 2);
  }
  return m;
}

double kl_laplace(double mu, double scale) {
  if (scale <= 0.0) throw std::invalid_argument("kl_laplace: scale must be > 0");
  double am = std::fabs(mu);
  return am + scale * std::exp(-am / scale) - 1.0 - std::log(scale);
}

SpeakerCode sample_pivot(const SpeakerCode& source, nn::Rng& rng) {
  if (source.count < 2) throw std::invalid_argument("sample_pivot: need at least 2 speakers");
  std::size_t draw = rng.below(source.count - 1);
  std::size_t pivot = draw < source.index ? draw : draw + 1;
  return SpeakerCode(pivot, source.count);
}

CycleVae::CycleVae(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(0);
  init_params(rng);
}

void CycleVae::init_params(nn::Rng& rng) {
  params_ = nn::ParameterStore();
  adam_steps_ = 0;
  auto make_net = [&](const std::string& prefix, std::size_t din, std::size_t dout,
                      bool feedback) {
    const std::size_t c = cfg_.conv_channels;
    const std::size_t h = cfg_.hidden;
    const std::size_t k = cfg_.conv_kernel;
    const std::size_t du = c + (feedback ? dout : 0);
    params_.create(prefix + ".conv.w", nn::uniform_init({k, c, din}, din * k, rng));
    params_.create(prefix + ".conv.b", Tensor::zeros({c}));
    params_.create(prefix + ".gru.w_ih", nn::uniform_init({3 * h, du}, du, rng));
    params_.create(prefix + ".gru.w_hh", nn::uniform_init({3 * h, h}, h, rng));
    params_.create(prefix + ".gru.b_ih", Tensor::zeros({3 * h}));
    params_.create(prefix + ".gru.b_hh", Tensor::zeros({3 * h}));
    params_.create(prefix + ".out.w", nn::uniform_init({dout, h}, h, rng));
    params_.create(prefix + ".out.b", Tensor::zeros({dout}));
  };
  make_net("enc", cfg_.input_dim(), cfg_.encoder_out_dim(), cfg_.encoder_feedback);
  make_net("dec", cfg_.latent_dim + cfg_.n_speakers, cfg_.mcep_dim, cfg_.decoder_feedback);
}

void CycleVae::set_speaker_stats(std::vector<dsp::LogF0Stats> stats) {
  if (stats.size() != cfg_.n_speakers)
    throw std::invalid_argument("set_speaker_stats: need stats for every speaker");
  stats_ = std::move(stats);
}

const dsp::LogF0Stats& CycleVae::speaker_stats(std::size_t speaker) const {
  if (speaker >= stats_.size())
    throw std::runtime_error("CycleVae: missing speaker stats for speaker " +
                             std::to_string(speaker));
  return stats_[speaker];
}

Var CycleVae::run_recurrent(Tape& tp, Var x, const std::string& prefix, bool feedback) {
  Var w_ih = tp.param(params_, prefix + ".gru.w_ih");
  Var w_hh = tp.param(params_, prefix + ".gru.w_hh");
  Var b_ih = tp.param(params_, prefix + ".gru.b_ih");
  Var b_hh = tp.param(params_, prefix + ".gru.b_hh");
  Var w_out = tp.param(params_, prefix + ".out.w");
  Var b_out = tp.param(params_, prefix + ".out.b");

  const std::size_t t = tp.val(x).rows();
  const std::size_t trunc = cfg_.bptt_truncation;
  if (trunc == 0 || t <= trunc) {
    return tp.recurrent(x, w_ih, w_hh, b_ih, b_hh, w_out, b_out, feedback).out;
  }
  // truncated BPTT: state carries across segments as detached values
  std::vector<Var> outs;
  Tensor h0, o0;
  for (std::size_t lo = 0; lo < t; lo += trunc) {
    std::size_t hi = std::min(t, lo + trunc);
    nn::Recurrence rec =
        tp.recurrent(tp.slice_rows(x, lo, hi), w_ih, w_hh, b_ih, b_hh, w_out, b_out, feedback,
                     h0, o0);
    outs.push_back(rec.out);
    h0 = rec.h_last;
    o0 = rec.o_last;
  }
  return tp.concat_rows(outs);
}

CycleVae::PosteriorVars CycleVae::encode_t(Tape& tp, Var x) {
  if (tp.val(x).cols() != cfg_.input_dim())
    throw std::invalid_argument("encode: input dimension mismatch");
  Var h = tp.conv1d(x, tp.param(params_, "enc.conv.w"), tp.param(params_, "enc.conv.b"), 1, false);
  h = tp.tanh(h);
  Var o = run_recurrent(tp, h, "enc", cfg_.encoder_feedback);
  const std::size_t dz = cfg_.latent_dim;
  PosteriorVars p;
  p.mu = tp.slice_cols(o, 0, dz);
  p.log_scale = tp.slice_cols(o, dz, 2 * dz);
  p.logits = tp.slice_cols(o, 2 * dz, 2 * dz + cfg_.n_speakers);
  return p;
}

Var CycleVae::decode_t(Tape& tp, Var z, const SpeakerCode& code) {
  if (tp.val(z).cols() != cfg_.latent_dim)
    throw std::invalid_argument("decode: latent dimension mismatch");
  if (code.count != cfg_.n_speakers || code.index >= code.count)
    throw std::invalid_argument("decode: invalid speaker code");
  Var cm = tp.constant(code.one_hot_rows(tp.val(z).rows()));
  Var x = tp.concat_cols(z, cm);
  Var h = tp.conv1d(x, tp.param(params_, "dec.conv.w"), tp.param(params_, "dec.conv.b"), 1, false);
  h = tp.tanh(h);
  return run_recurrent(tp, h, "dec", cfg_.decoder_feedback);
}

nn::Tensor CycleVae::excitation_for_pivot(const dsp::AcousticFrameSequence& seq, std::size_t src,
                                          std::size_t pivot) const {
  const dsp::LogF0Stats& s = speaker_stats(src);
  const dsp::LogF0Stats& p = speaker_stats(pivot);
  const std::size_t t = seq.frames();
  Tensor e({t, cfg_.excitation_dim});
  for (std::size_t r = 0; r < t; ++r) {
    double* row = e.row_ptr(r);
    row[0] = dsp::transform_log_f0(seq.log_f0[r], s, p);
    row[1] = static_cast<double>(seq.uv[r]);
    auto ap = seq.ap_frame(r);
    std::copy(ap.begin(), ap.end(), row + 2);
  }
  return e;
}

CycleVae::CycleVars CycleVae::cycle_forward_t(
    Tape& tp, const dsp::AcousticFrameSequence& seq, const SpeakerCode& source,
    const std::vector<std::size_t>& pivots,
    const std::vector<std::pair<Tensor, Tensor>>& eps) {
  if (seq.mcep_dim != cfg_.mcep_dim) throw std::invalid_argument("cycle_forward: mcep dim mismatch");
  if (pivots.size() != cfg_.n_cycles || eps.size() != cfg_.n_cycles)
    throw std::invalid_argument("cycle_forward: need one pivot and noise pair per cycle");
  for (std::size_t p : pivots)
    if (p == source.index) throw std::invalid_argument("cycle_forward: pivot equals source");
  if (stats_.empty()) throw std::runtime_error("cycle_forward: speaker stats not set");

  const std::size_t t = seq.frames();
  Tensor full = feature_matrix(seq);
  Tensor spectra_x({t, cfg_.mcep_dim});
  Tensor excitation_x({t, cfg_.excitation_dim});
  for (std::size_t r = 0; r < t; ++r) {
    std::copy(full.row_ptr(r), full.row_ptr(r) + cfg_.mcep_dim, spectra_x.row_ptr(r));
    std::copy(full.row_ptr(r) + cfg_.mcep_dim, full.row_ptr(r) + full.cols(),
              excitation_x.row_ptr(r));
  }
  Var e_x = tp.constant(excitation_x);

  CycleVars cv;
  Var spectra = tp.constant(spectra_x);  // s^(x|y)_0 = s^(x)
  for (std::size_t n = 0; n < cfg_.n_cycles; ++n) {
    CycleVars::Cycle c;
    c.pivot = pivots[n];
    c.encoder_input_spectra = tp.val(spectra);
    c.encoder_input_excitation = tp.val(e_x);

    const auto& [eps_x, eps_y] = eps[n];
    if (eps_x.shape() != std::vector<std::size_t>{t, cfg_.latent_dim} ||
        eps_y.shape() != std::vector<std::size_t>{t, cfg_.latent_dim})
      throw std::invalid_argument("cycle_forward: noise shape mismatch");

    Var x_n = tp.concat_cols(spectra, e_x);
    c.post_x = encode_t(tp, x_n);
    c.z = tp.sub(c.post_x.mu, tp.mul(tp.exp(c.post_x.log_scale), tp.constant(eps_x)));
    c.reconstructed = decode_t(tp, c.z, source);
    c.converted = decode_t(tp, c.z, SpeakerCode(pivots[n], cfg_.n_speakers));

    c.excitation_y = excitation_for_pivot(seq, source.index, pivots[n]);
    Var y_n = tp.concat_cols(c.converted, tp.constant(c.excitation_y));
    c.post_y = encode_t(tp, y_n);
    c.z_y = tp.sub(c.post_y.mu, tp.mul(tp.exp(c.post_y.log_scale), tp.constant(eps_y)));
    c.cyclic = decode_t(tp, c.z_y, source);

    spectra = c.cyclic;  // recycled with the original excitation
    cv.cycles.push_back(c);
  }
  return cv;
}

Var CycleVae::mcd_loss_t(Tape& tp, Var pred, Var target_sp) {
  Var d = tp.sub(pred, target_sp);
  Var dd = tp.slice_cols(d, 1, cfg_.mcep_dim);
  Var rs = tp.row_sum(tp.square(dd));
  Var r = tp.sqrt(tp.add_scalar(tp.mul_scalar(rs, 2.0), 1e-12));
  return tp.mul_scalar(tp.mean(r), dsp::kMcdScale);
}

Var CycleVae::power_loss_t(Tape& tp, Var pred, Var target_sp) {
  Var d = tp.sub(pred, target_sp);
  return tp.mean(tp.abs(tp.slice_cols(d, 0, 1)));
}

Var CycleVae::kl_loss_t(Tape& tp, const PosteriorVars& post) {
  // |mu| + scale*exp(-|mu|/scale) - 1 - log_scale, summed over dims,
  // averaged over frames
  Var a = tp.abs(post.mu);
  Var s = tp.exp(post.log_scale);
  Var p = tp.mul(s, tp.exp(tp.neg(tp.div(a, s))));
  Var el = tp.sub(tp.add(a, p), tp.add_scalar(post.log_scale, 1.0));
  return tp.mean(tp.row_sum(el));
}

CycleVae::LossVars CycleVae::elbo_loss_t(Tape& tp, const CycleVars& cv,
                                         const Tensor& target_spectra,
                                         const SpeakerCode& source) {
  if (cv.cycles.empty()) throw std::invalid_argument("elbo_loss: no cycles");
  for (const auto& c : cv.cycles)
    if (tp.val(c.reconstructed).rows() != target_spectra.rows())
      throw std::invalid_argument("elbo_loss: frame count mismatch");

  Var target = tp.constant(target_spectra);
  LossVars out;
  Var total;
  for (const auto& c : cv.cycles) {
    Var rec = mcd_loss_t(tp, c.reconstructed, target);
    Var rec_pow = power_loss_t(tp, c.reconstructed, target);
    Var cyc = mcd_loss_t(tp, c.cyclic, target);
    Var cyc_pow = power_loss_t(tp, c.cyclic, target);
    Var klx = kl_loss_t(tp, c.post_x);
    Var kly = kl_loss_t(tp, c.post_y);
    Var cex = tp.softmax_cross_entropy(c.post_x.logits, source.index);
    Var cey = tp.softmax_cross_entropy(c.post_y.logits, c.pivot);

    out.values.rec_mcd += tp.val(rec)[0];
    out.values.rec_pow += tp.val(rec_pow)[0];
    out.values.cyc_mcd += tp.val(cyc)[0];
    out.values.cyc_pow += tp.val(cyc_pow)[0];
    out.values.kl_x += tp.val(klx)[0];
    out.values.kl_y += tp.val(kly)[0];
    out.values.ce_x += tp.val(cex)[0];
    out.values.ce_y += tp.val(cey)[0];

    Var cycle_total = tp.add(
        tp.add(tp.mul_scalar(tp.add(rec, tp.mul_scalar(rec_pow, cfg_.w_pow)), cfg_.w_rec),
               tp.mul_scalar(tp.add(cyc, tp.mul_scalar(cyc_pow, cfg_.w_pow)), cfg_.w_cyc)),
        tp.add(tp.mul_scalar(tp.add(klx, kly), cfg_.w_kl),
               tp.mul_scalar(tp.add(cex, cey), cfg_.w_ce)));
    total = total.valid() ? tp.add(total, cycle_total) : cycle_total;
  }
  out.total = total;
  out.values.total = tp.val(total)[0];
  return out;
}

LatentPosterior CycleVae::encode(const dsp::AcousticFrameSequence& seq) {
  Tape tp;
  PosteriorVars p = encode_t(tp, tp.constant(feature_matrix(seq)));
  return {tp.val(p.mu), tp.val(p.log_scale), tp.val(p.logits)};
}

Tensor CycleVae::decode(const Tensor& z, const SpeakerCode& code) {
  Tape tp;
  return tp.val(decode_t(tp, tp.constant(z), code));
}

Tensor CycleVae::reparameterize(const LatentPosterior& post, const Tensor& eps) {
  if (!post.mu.same_shape(eps)) throw std::invalid_argument("reparameterize: shape mismatch");
  Tensor z(post.mu.shape());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = post.mu[i] - std::exp(post.log_scale[i]) * eps[i];
  return z;
}

CycleOutputs CycleVae::cycle_forward(const dsp::AcousticFrameSequence& seq,
                                     const SpeakerCode& source,
                                     const std::vector<std::size_t>& pivots,
                                     const std::vector<std::pair<Tensor, Tensor>>& eps) {
  Tape tp;
  CycleVars cv = cycle_forward_t(tp, seq, source, pivots, eps);
  CycleOutputs out;
  for (const auto& c : cv.cycles) {
    CycleOutputs::Cycle oc;
    oc.encoder_input_spectra = c.encoder_input_spectra;
    oc.encoder_input_excitation = c.encoder_input_excitation;
    oc.post_x = {tp.val(c.post_x.mu), tp.val(c.post_x.log_scale), tp.val(c.post_x.logits)};
    oc.post_y = {tp.val(c.post_y.mu), tp.val(c.post_y.log_scale), tp.val(c.post_y.logits)};
    oc.z = tp.val(c.z);
    oc.z_y = tp.val(c.z_y);
    oc.reconstructed = tp.val(c.reconstructed);
    oc.converted = tp.val(c.converted);
    oc.cyclic = tp.val(c.cyclic);
    oc.excitation_y = c.excitation_y;
    oc.pivot = c.pivot;
    out.cycles.push_back(std::move(oc));
  }
  return out;
}

namespace {

double mean_frame_mcd(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    acc += dsp::mcd(std::span<const double>(a.row_ptr(r), a.cols()),
                    std::span<const double>(b.row_ptr(r), b.cols()));
  return acc / static_cast<double>(a.rows());
}

double mean_power_abs(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) acc += std::fabs(a.at(r, 0) - b.at(r, 0));
  return acc / static_cast<double>(a.rows());
}

double mean_kl(const LatentPosterior& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.mu.size(); ++i)
    acc += kl_laplace(p.mu[i], std::exp(p.log_scale[i]));
  return acc / static_cast<double>(p.mu.rows());
}

double cross_entropy(const Tensor& logits, std::size_t target) {
  double acc = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* l = logits.row_ptr(r);
    double mx = l[0];
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, l[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(l[c] - mx);
    acc += std::log(z) - (l[target] - mx);
  }
  return acc / static_cast<double>(logits.rows());
}

double logits_accuracy(const Tensor& logits, std::size_t target) {
  std::size_t hit = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* l = logits.row_ptr(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (l[c] > l[best]) best = c;
    hit += best == target ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(logits.rows());
}

}  // namespace

ElboBreakdown CycleVae::elbo_loss(const CycleOutputs& outputs, const Tensor& target_spectra,
                                  const SpeakerCode& source) const {
  if (outputs.cycles.empty()) throw std::invalid_argument("elbo_loss: no cycles");
  ElboBreakdown b;
  for (const auto& c : outputs.cycles) {
    if (c.reconstructed.rows() != target_spectra.rows())
      throw std::invalid_argument("elbo_loss: frame count mismatch");
    double rec = mean_frame_mcd(c.reconstructed, target_spectra);
    double rec_pow = mean_power_abs(c.reconstructed, target_spectra);
    double cyc = mean_frame_mcd(c.cyclic, target_spectra);
    double cyc_pow = mean_power_abs(c.cyclic, target_spectra);
    double klx = mean_kl(c.post_x);
    double kly = mean_kl(c.post_y);
    double cex = cross_entropy(c.post_x.speaker_logits, source.index);
    double cey = cross_entropy(c.post_y.speaker_logits, c.pivot);
    b.rec_mcd += rec;
    b.rec_pow += rec_pow;
    b.cyc_mcd += cyc;
    b.cyc_pow += cyc_pow;
    b.kl_x += klx;
    b.kl_y += kly;
    b.ce_x += cex;
    b.ce_y += cey;
    b.total += cfg_.w_rec * (rec + cfg_.w_pow * rec_pow) + cfg_.w_cyc * (cyc + cfg_.w_pow * cyc_pow) +
               cfg_.w_kl * (klx + kly) + cfg_.w_ce * (cex + cey);
  }
  return b;
}

dsp::AcousticFrameSequence CycleVae::convert(const dsp::AcousticFrameSequence& seq,
                                             const SpeakerCode& source,
                                             const SpeakerCode& target,
                                             const dsp::LogF0Stats& src_stats,
                                             const dsp::LogF0Stats& tgt_stats) {
  if (src_stats.std <= 0.0 || tgt_stats.std <= 0.0)
    throw std::invalid_argument("convert: invalid speaker stats");
  if (source.count != cfg_.n_speakers || target.count != cfg_.n_speakers)
    throw std::invalid_argument("convert: speaker code count mismatch");
  Tape tp;
  PosteriorVars p = encode_t(tp, tp.constant(feature_matrix(seq)));
  Var spectra = decode_t(tp, p.mu, target);  // z = mu: deterministic inference
  const Tensor& sp = tp.val(spectra);

  dsp::AcousticFrameSequence out;
  out.mcep_dim = seq.mcep_dim;
  out.ap_dim = seq.ap_dim;
  out.frame_shift_ms = seq.frame_shift_ms;
  out.sample_rate = seq.sample_rate;
  out.mcep.assign(sp.data(), sp.data() + sp.size());
  out.log_f0.resize(seq.frames());
  for (std::size_t t = 0; t < seq.frames(); ++t)
    out.log_f0[t] = dsp::transform_log_f0(seq.log_f0[t], src_stats, tgt_stats);
  out.uv = seq.uv;
  out.coded_ap = seq.coded_ap;
  return out;
}

CycleVae::StepReport CycleVae::train_step(std::span<const TrainItem> batch, nn::Rng& rng,
                                          const nn::AdamConfig& adam, double grad_clip) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  StepReport report;
  for (const TrainItem& item : batch) {
    SpeakerCode source(item.speaker, cfg_.n_speakers);
    const std::size_t t = item.seq->frames();
    std::vector<std::size_t> pivots;
    std::vector<std::pair<Tensor, Tensor>> eps;
    for (std::size_t n = 0; n < cfg_.n_cycles; ++n) {
      pivots.push_back(sample_pivot(source, rng).index);
      Tensor ex = nn::sample_laplace({t, cfg_.latent_dim}, rng);
      Tensor ey = nn::sample_laplace({t, cfg_.latent_dim}, rng);
      eps.emplace_back(std::move(ex), std::move(ey));
    }
    Tape tp;
    CycleVars cv = cycle_forward_t(tp, *item.seq, source, pivots, eps);
    Tensor target({t, cfg_.mcep_dim});
    for (std::size_t r = 0; r < t; ++r) {
      auto mc = item.seq->mcep_frame(r);
      std::copy(mc.begin(), mc.end(), target.row_ptr(r));
    }
    LossVars loss = elbo_loss_t(tp, cv, target, source);
    tp.backward(tp.mul_scalar(loss.total, inv));

    report.terms.rec_mcd += loss.values.rec_mcd * inv;
    report.terms.rec_pow += loss.values.rec_pow * inv;
    report.terms.cyc_mcd += loss.values.cyc_mcd * inv;
    report.terms.cyc_pow += loss.values.cyc_pow * inv;
    report.terms.kl_x += loss.values.kl_x * inv;
    report.terms.kl_y += loss.values.kl_y * inv;
    report.terms.ce_x += loss.values.ce_x * inv;
    report.terms.ce_y += loss.values.ce_y * inv;
    report.terms.total += loss.values.total * inv;
  }
  report.grad_norm = params_.grad_norm();
  if (grad_clip > 0.0) params_.clip_grad_norm(grad_clip);
  adam_step(params_, adam, adam_steps_);
  return report;
}

std::vector<std::size_t> CycleVae::deterministic_pivots(const SpeakerCode& source,
                                                        std::size_t n_cycles) {
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < source.count; ++i)
    if (i != source.index) others.push_back(i);
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < n_cycles; ++n) out.push_back(others[n % others.size()]);
  return out;
}

CycleVae::EvalMetrics CycleVae::evaluate_utterance(const dsp::AcousticFrameSequence& seq,
                                                   const SpeakerCode& source) {
  const std::size_t t = seq.frames();
  std::vector<std::size_t> pivots = deterministic_pivots(source, cfg_.n_cycles);
  std::vector<std::pair<Tensor, Tensor>> eps(
      cfg_.n_cycles, {Tensor::zeros({t, cfg_.latent_dim}), Tensor::zeros({t, cfg_.latent_dim})});
  CycleOutputs out = cycle_forward(seq, source, pivots, eps);

  Tensor target({t, cfg_.mcep_dim});
  for (std::size_t r = 0; r < t; ++r) {
    auto mc = seq.mcep_frame(r);
    std::copy(mc.begin(), mc.end(), target.row_ptr(r));
  }

  EvalMetrics m;
  m.rec_mcd = mean_frame_mcd(out.cycles[0].reconstructed, target);
  for (const auto& c : out.cycles) {
    m.cyc_mcd += mean_frame_mcd(c.cyclic, target) / static_cast<double>(out.cycles.size());
    m.kl_x += mean_kl(c.post_x) / static_cast<double>(out.cycles.size());
    m.kl_y += mean_kl(c.post_y) / static_cast<double>(out.cycles.size());
    m.spk_acc_x +=
        logits_accuracy(c.post_x.speaker_logits, source.index) / static_cast<double>(out.cycles.size());
    m.spk_acc_y +=
        logits_accuracy(c.post_y.speaker_logits, c.pivot) / static_cast<double>(out.cycles.size());
  }
  ElboBreakdown b = elbo_loss(out, target, source);
  m.total = b.total;
  return m;
}

}  // namespace vc::vae
