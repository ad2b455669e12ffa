#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vc/dsp/f0.hpp"
#include "vc/dsp/features.hpp"
#include "vc/nn/random.hpp"
#include "vc/nn/store.hpp"
#include "vc/nn/tape.hpp"

namespace vc::vae {

// Time-invariant one-hot speaker identity.
struct SpeakerCode {
  std::size_t index = 0;
  std::size_t count = 2;

  SpeakerCode() = default;
  SpeakerCode(std::size_t idx, std::size_t n);
  nn::Tensor one_hot() const;
  nn::Tensor one_hot_rows(std::size_t frames) const;
};

struct ModelConfig {
  std::size_t mcep_dim = 49;
  std::size_t excitation_dim = 5;  // log-F0, U/V, 3-band aperiodicity
  std::size_t latent_dim = 32;
  std::size_t n_speakers = 2;
  std::size_t n_cycles = 2;
  std::size_t conv_channels = 64;
  std::size_t conv_kernel = 7;  // non-causal receptive field
  std::size_t hidden = 128;
  bool encoder_feedback = true;
  bool decoder_feedback = true;
  std::size_t bptt_truncation = 0;  // frames per BPTT segment; 0 = full sequence

  // loss weights
  double w_rec = 1.0;
  double w_cyc = 1.0;
  double w_kl = 1.0;
  double w_ce = 1.0;
  double w_pow = 1.0;  // absolute-error weight on the power coefficient

  void validate() const;
  std::size_t input_dim() const { return mcep_dim + excitation_dim; }
  std::size_t encoder_out_dim() const { return 2 * latent_dim + n_speakers; }
};

// Per-frame location/scale of the Laplacian latent plus speaker logits.
struct LatentPosterior {
  nn::Tensor mu;              // [T x Dz]
  nn::Tensor log_scale;       // [T x Dz]
  nn::Tensor speaker_logits;  // [T x S]
};

// Everything one cycle pass produces, by value.
struct CycleOutputs {
  struct Cycle {
    nn::Tensor encoder_input_spectra;     // what the x-encoder saw this cycle
    nn::Tensor encoder_input_excitation;  // always the original e^(x)
    LatentPosterior post_x, post_y;
    nn::Tensor z, z_y;                     // [T x Dz]
    nn::Tensor reconstructed;              // decode(z, source)
    nn::Tensor converted;                  // decode(z, pivot)
    nn::Tensor cyclic;                     // decode(z_y, source)
    nn::Tensor excitation_y;               // [T x 5]: transformed log-F0, input U/V + ap
    std::size_t pivot = 0;
  };
  std::vector<Cycle> cycles;
};

struct ElboBreakdown {
  double rec_mcd = 0.0, rec_pow = 0.0;
  double cyc_mcd = 0.0, cyc_pow = 0.0;
  double kl_x = 0.0, kl_y = 0.0;
  double ce_x = 0.0, ce_y = 0.0;
  double total = 0.0;  // weighted sum over cycles
};

// Acoustic features as the model input matrix [T x (mcep + excitation)],
// columns ordered mel-cepstrum, log-F0, U/V, coded aperiodicity.
nn::Tensor feature_matrix(const dsp::AcousticFrameSequence& seq);

// Closed-form KL(Laplace(mu, scale) || Laplace(0, 1)).
double kl_laplace(double mu, double scale);

// Uniform draw over all codes except the source.
SpeakerCode sample_pivot(const SpeakerCode& source, nn::Rng& rng);

// The CycleVAE spectral model: unified many-to-many encoder/decoder with
// Laplacian reparameterization and the N-cycle conversion ->
// cyclic-reconstruction flow.
class CycleVae {
 public:
  explicit CycleVae(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }
  std::uint64_t& adam_steps() { return adam_steps_; }

  void init_params(nn::Rng& rng);

  // Excitation transform needs voiced log-F0 stats per speaker.
  void set_speaker_stats(std::vector<dsp::LogF0Stats> stats);
  const dsp::LogF0Stats& speaker_stats(std::size_t speaker) const;
  bool has_speaker_stats() const { return !stats_.empty(); }

  // ---- graph builders ----
  struct PosteriorVars {
    nn::Var mu, log_scale, logits;
  };
  PosteriorVars encode_t(nn::Tape& tp, nn::Var x);
  nn::Var decode_t(nn::Tape& tp, nn::Var z, const SpeakerCode& code);

  struct CycleVars {
    struct Cycle {
      PosteriorVars post_x, post_y;
      nn::Var z, z_y, reconstructed, converted, cyclic;
      nn::Tensor excitation_y;
      nn::Tensor encoder_input_spectra;
      nn::Tensor encoder_input_excitation;
      std::size_t pivot = 0;
    };
    std::vector<Cycle> cycles;
  };
  // eps[n] = {eps_x, eps_y} Laplace noise per cycle, each [T x Dz].
  CycleVars cycle_forward_t(nn::Tape& tp, const dsp::AcousticFrameSequence& seq,
                            const SpeakerCode& source, const std::vector<std::size_t>& pivots,
                            const std::vector<std::pair<nn::Tensor, nn::Tensor>>& eps);

  struct LossVars {
    nn::Var total;
    ElboBreakdown values;
  };
  LossVars elbo_loss_t(nn::Tape& tp, const CycleVars& cv, const nn::Tensor& target_spectra,
                       const SpeakerCode& source);

  // ---- value-level operations ----
  LatentPosterior encode(const dsp::AcousticFrameSequence& seq);
  nn::Tensor decode(const nn::Tensor& z, const SpeakerCode& code);
  static nn::Tensor reparameterize(const LatentPosterior& post, const nn::Tensor& eps);
  CycleOutputs cycle_forward(const dsp::AcousticFrameSequence& seq, const SpeakerCode& source,
                             const std::vector<std::size_t>& pivots,
                             const std::vector<std::pair<nn::Tensor, nn::Tensor>>& eps);
  // Independent plain-math evaluation of the loss terms from cycle outputs.
  ElboBreakdown elbo_loss(const CycleOutputs& outputs, const nn::Tensor& target_spectra,
                          const SpeakerCode& source) const;

  // Deterministic conversion: z = posterior location, transformed log-F0,
  // U/V and aperiodicity carried over bit-exactly.
  dsp::AcousticFrameSequence convert(const dsp::AcousticFrameSequence& seq,
                                     const SpeakerCode& source, const SpeakerCode& target,
                                     const dsp::LogF0Stats& src_stats,
                                     const dsp::LogF0Stats& tgt_stats);

  // ---- training ----
  struct TrainItem {
    const dsp::AcousticFrameSequence* seq = nullptr;
    std::size_t speaker = 0;
  };
  struct StepReport {
    ElboBreakdown terms;     // batch means
    double grad_norm = 0.0;  // pre-clip
  };
  StepReport train_step(std::span<const TrainItem> batch, nn::Rng& rng,
                        const nn::AdamConfig& adam, double grad_clip);

  // Deterministic per-utterance metrics (z = mu, round-robin pivots).
  struct EvalMetrics {
    double rec_mcd = 0.0;
    double cyc_mcd = 0.0;
    double kl_x = 0.0, kl_y = 0.0;
    double spk_acc_x = 0.0, spk_acc_y = 0.0;
    double total = 0.0;
  };
  EvalMetrics evaluate_utterance(const dsp::AcousticFrameSequence& seq,
                                 const SpeakerCode& source);

  static std::vector<std::size_t> deterministic_pivots(const SpeakerCode& source,
                                                       std::size_t n_cycles);

 private:
  nn::Var run_recurrent(nn::Tape& tp, nn::Var x, const std::string& prefix, bool feedback);
  nn::Tensor excitation_for_pivot(const dsp::AcousticFrameSequence& seq, std::size_t src,
                                  std::size_t pivot) const;
  nn::Var mcd_loss_t(nn::Tape& tp, nn::Var pred, nn::Var target_sp);
  nn::Var power_loss_t(nn::Tape& tp, nn::Var pred, nn::Var target_sp);
  nn::Var kl_loss_t(nn::Tape& tp, const PosteriorVars& post);

  ModelConfig cfg_;
  nn::ParameterStore params_;
  std::vector<dsp::LogF0Stats> stats_;
  std::uint64_t adam_steps_ = 0;
};

}  // namespace vc::vae
