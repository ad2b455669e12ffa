#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vc/dsp/features.hpp"
#include "vc/dsp/wav.hpp"
#include "vc/nn/random.hpp"
#include "vc/nn/store.hpp"
#include "vc/nn/tape.hpp"

namespace vc::pwg {

struct StftResolution {
  std::size_t fft_size = 1024;
  std::size_t hop = 120;
  std::size_t win_length = 600;
};

struct VocoderConfig {
  std::size_t sample_rate = 24000;
  std::size_t hop = 120;  // samples per conditioning frame
  std::size_t cond_channels = 54;

  // generator: noise-driven non-causal dilated conv stack, gated activations
  std::size_t residual_channels = 16;
  std::size_t skip_channels = 16;
  std::size_t layers = 10;
  std::size_t dilation_cycles = 2;
  std::size_t kernel = 3;

  // discriminator: non-causal dilated conv stack, per-sample scores
  std::size_t disc_layers = 10;
  std::size_t disc_channels = 16;
  std::size_t disc_kernel = 3;
  double leaky_slope = 0.2;

  std::vector<StftResolution> resolutions = {
      {512, 60, 240}, {1024, 120, 600}, {2048, 240, 1200}};
  double lambda_adv = 4.0;

  // Sample-rate sin/cos of the accumulated F0 phase appended to the
  // upsampled conditioning. A deterministic re-encoding of the log-F0
  // channel; a desk-scale generator cannot phase-lock harmonics from white
  // noise within the step budget without it.
  bool phase_conditioning = true;
  std::size_t logf0_channel = 49;  // column of log-F0 in the feature matrix

  std::size_t pretrain_steps = 2000;
  std::size_t adversarial_steps = 4000;
  std::size_t segment_frames = 24;  // random crop per training step
  double lr_gen = 1e-4;
  double lr_disc = 5e-5;
  // linear ramp from 0; guards Adam's moments against the very large
  // early log-magnitude gradients
  std::size_t lr_warmup_steps = 100;
  double grad_clip = 10.0;

  void validate() const;
  std::size_t dilation_at(std::size_t layer) const;
  std::size_t disc_receptive_field() const;
  std::size_t upsampled_channels() const {
    return cond_channels + (phase_conditioning ? 2 : 0);
  }
};

// Acoustic conditioning plus where it came from.
struct ConditioningSequence {
  enum class Provenance { natural, reconstructed, cyclic };
  nn::Tensor features;  // [frames x cond_channels], unnormalized
  Provenance provenance = Provenance::natural;
  std::size_t pivot = 0;  // only meaningful for cyclic

  std::size_t frames() const { return features.rows(); }
};

// One utterance (or crop) with every conditioning variant for augmentation.
struct AugmentedBatch {
  std::vector<double> waveform;  // frames * hop samples
  ConditioningSequence natural;
  std::optional<ConditioningSequence> reconstructed;
  std::vector<ConditioningSequence> cyclic;

  std::size_t frames() const { return natural.frames(); }
  std::size_t variant_count() const {
    return 1 + (reconstructed ? 1 : 0) + cyclic.size();
  }
  void validate(const VocoderConfig& cfg) const;
};

// Differentiable one-sided STFT magnitudes of a waveform node.
nn::Var stft_magnitude_t(nn::Tape& tp, nn::Var wave, const StftResolution& res);

struct MrStftTerms {
  std::vector<double> spectral_convergence;  // per resolution
  std::vector<double> log_magnitude;         // per resolution
  double total = 0.0;                        // mean over resolutions of (sc + mag)
};

// Value-level multiresolution STFT loss between two equal-length waveforms.
MrStftTerms mr_stft_terms(const std::vector<double>& w, const std::vector<double>& w_hat,
                          const std::vector<StftResolution>& resolutions);
double mr_stft_loss(const std::vector<double>& w, const std::vector<double>& w_hat,
                    const std::vector<StftResolution>& resolutions);

class Vocoder {
 public:
  explicit Vocoder(VocoderConfig cfg);

  const VocoderConfig& config() const { return cfg_; }
  nn::ParameterStore& gen_params() { return gen_; }
  nn::ParameterStore& disc_params() { return disc_; }
  const nn::ParameterStore& gen_params() const { return gen_; }
  const nn::ParameterStore& disc_params() const { return disc_; }
  std::uint64_t& gen_adam_steps() { return gen_steps_; }
  std::uint64_t& disc_adam_steps() { return disc_steps_; }

  void init_params(nn::Rng& rng);

  // Per-channel conditioning normalization (training-corpus statistics).
  void set_cond_stats(nn::Tensor mean, nn::Tensor std);
  const nn::Tensor& cond_mean() const { return cond_mean_; }
  const nn::Tensor& cond_std() const { return cond_std_; }

  // Nearest-neighbour upsampling by hop after normalization: [F x C] ->
  // [F*hop x C].
  nn::Tensor upsample_conditioning(const nn::Tensor& features) const;

  // ---- graph builders ----
  nn::Var generator_t(nn::Tape& tp, const nn::Tensor& noise, const nn::Tensor& cond_up,
                      bool train_params);
  nn::Var discriminator_t(nn::Tape& tp, nn::Var wave_col, bool train_params);
  nn::Var mr_stft_loss_t(nn::Tape& tp, const std::vector<double>& ref, nn::Var w_hat);

  // ---- value-level operations ----
  // noise length must equal frames * hop.
  std::vector<double> generator_forward(const std::vector<double>& noise,
                                        const ConditioningSequence& cond);
  std::vector<double> discriminator_forward(const std::vector<double>& wave);

  struct GenLossReport {
    double total = 0.0;
    double stft = 0.0;  // mean over variants
    double adv = 0.0;   // mean over variants (0 during pretrain)
    std::vector<double> stft_terms;  // one per variant
    std::vector<double> adv_terms;   // one per variant (empty during pretrain)
  };
  // Builds the full generator objective on the tape. adversarial toggles the
  // (1 - D(G(h|.)))^2 terms.
  GenLossReport generator_loss_t(nn::Tape& tp, const AugmentedBatch& batch, bool adversarial,
                                 nn::Rng& rng, nn::Var* total_out);
  GenLossReport generator_loss(const AugmentedBatch& batch, bool adversarial, nn::Rng& rng);

  struct DiscLossReport {
    double total = 0.0;
    double real = 0.0;   // mean (1 - D(w))^2
    double fake = 0.0;   // mean over variants of mean D(w_hat)^2
  };
  // Fakes are regenerated with fresh noise and detached from the generator.
  DiscLossReport discriminator_loss_t(nn::Tape& tp, const AugmentedBatch& batch, bool pretrain,
                                      nn::Rng& rng, nn::Var* total_out);
  DiscLossReport discriminator_loss(const AugmentedBatch& batch, bool pretrain, nn::Rng& rng);

  struct StepReport {
    bool adversarial = false;
    double stft = 0.0;
    double adv_g = 0.0;   // only in adversarial stage
    double loss_d = 0.0;  // only in adversarial stage
  };
  // Random-crop training step. Pretrain: generator on STFT terms only.
  // Adversarial: one discriminator step, then one generator step.
  StepReport train_step(const AugmentedBatch& batch, std::size_t step_index, nn::Rng& rng);

  dsp::Waveform synthesize(const ConditioningSequence& cond, nn::Rng& rng);

 private:
  AugmentedBatch crop_batch(const AugmentedBatch& batch, nn::Rng& rng) const;

  VocoderConfig cfg_;
  nn::ParameterStore gen_, disc_;
  nn::Tensor cond_mean_, cond_std_;
  std::uint64_t gen_steps_ = 0, disc_steps_ = 0;
};

}  // namespace vc::pwg
