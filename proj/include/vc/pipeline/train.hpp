#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vc/pipeline/checkpoint.hpp"
#include "vc/pipeline/config.hpp"
#include "vc/pipeline/ingest.hpp"
#include "vc/pipeline/manifest.hpp"
#include "vc/pipeline/stats.hpp"
#include "vc/pwg/model.hpp"
#include "vc/vae/model.hpp"

namespace vc::pipeline {

// In-memory training corpus, manifest order.
struct LoadedCorpus {
  struct Utterance {
    dsp::AcousticFrameSequence seq;
    std::size_t speaker = 0;
    std::string source;  // original wav path
    std::uint32_t trim_begin = 0;
    std::uint32_t source_frames = 0;
  };
  std::vector<Utterance> train;
  std::vector<Utterance> validation;
};

LoadedCorpus load_corpus(const std::string& out_dir, const CorpusManifest& manifest);

// Copies values and optimizer moments; names and shapes must match exactly.
void restore_store(nn::ParameterStore& dst, const nn::ParameterStore& src);

vae::ModelConfig make_vae_config(const PipelineConfig& cfg, std::size_t n_speakers);
pwg::VocoderConfig make_vocoder_config(const PipelineConfig& cfg);

std::vector<std::string> manifest_speaker_ids(const CorpusManifest& manifest);

struct TrainVaeResult {
  std::string final_checkpoint;
  std::size_t epochs_run = 0;
  std::size_t steps_run = 0;
};

// Epoch-driven CycleVAE training. Writes vae_train_metrics.csv and
// vae_val_metrics.csv (columns: epoch, rec_mcd, cyc_mcd, kl_x, kl_y,
// spk_acc_x, spk_acc_y, total) plus periodic checkpoints under out_dir.
TrainVaeResult train_vae(const CorpusManifest& manifest, const PipelineConfig& cfg,
                         const std::string& out_dir, std::uint64_t seed,
                         const std::string& resume_checkpoint = "");

struct TrainVocoderResult {
  std::string final_checkpoint;
  std::size_t steps_run = 0;
};

// Two-stage vocoder training with converted-feature augmentation from a
// frozen CycleVAE checkpoint. Writes vocoder_metrics.csv (columns: step,
// stft_loss, adv_loss, disc_loss; adversarial columns stay empty during
// pretraining).
TrainVocoderResult train_vocoder(const CorpusManifest& manifest, const PipelineConfig& cfg,
                                 const std::string& out_dir, std::uint64_t seed,
                                 const std::string& vae_checkpoint);

// Model reconstruction from checkpoints (used by convert and tests).
struct LoadedVae {
  std::unique_ptr<vae::CycleVae> model;
  PipelineConfig cfg;
  std::vector<std::string> speaker_ids;
  std::vector<dsp::LogF0Stats> stats;
  std::vector<SpeakerProfile> profiles;
};
LoadedVae load_vae(const std::string& checkpoint_path);

struct LoadedVocoder {
  std::unique_ptr<pwg::Vocoder> model;
  PipelineConfig cfg;
  std::vector<std::string> speaker_ids;
};
LoadedVocoder load_vocoder(const std::string& checkpoint_path);

// Builds the augmentation variants for one utterance with a frozen model:
// natural, reconstructed, and cyclically reconstructed features per pivot.
pwg::AugmentedBatch build_augmented_batch(const LoadedCorpus::Utterance& utt,
                                          vae::CycleVae& model, std::size_t n_pivots,
                                          const std::vector<double>& aligned_wave,
                                          std::size_t hop);

// Waveform samples aligned with the trimmed feature frames, zero-padded to
// frames * hop.
std::vector<double> aligned_waveform(const LoadedCorpus::Utterance& utt, std::size_t hop);

std::string format_double(double v);  // shortest round-trippable decimal

}  // namespace vc::pipeline
