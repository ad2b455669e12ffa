#pragma once

#include <string>

#include "vc/dsp/features.hpp"
#include "vc/pipeline/manifest.hpp"
#include "vc/pwg/model.hpp"
#include "vc/vae/model.hpp"

namespace vc::pipeline {

struct TrainVaeOptions {
  std::size_t epochs = 200;
  std::size_t max_steps = 5000;  // hard cap across epochs
  std::size_t batch_size = 1;
  std::size_t checkpoint_every = 50;  // epochs
  double lr = 1e-4;
  double grad_clip = 10.0;
};

struct TrainVocoderOptions {
  std::size_t checkpoint_every = 1000;  // steps
  std::size_t log_every = 1;            // CSV row cadence
  std::size_t pivots = 0;               // cyclic variants per utterance; 0 = all others
};

// Everything configurable in one place; JSON keys mirror the field names.
struct PipelineConfig {
  dsp::AnalysisConfig analysis;
  vae::ModelConfig vae;
  pwg::VocoderConfig vocoder;
  TrainVaeOptions vae_train;
  TrainVocoderOptions vocoder_train;
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig pipeline_config_from_json_text(const std::string& text);
std::string pipeline_config_to_json_text(const PipelineConfig& cfg);

// Model-relevant snapshots embedded in checkpoints; resume compares these
// for exact equality. Speaker profiles ride along so conversion can run
// from checkpoints alone.
std::string vae_config_snapshot(const PipelineConfig& cfg, const CorpusManifest& manifest);
std::string vocoder_config_snapshot(const PipelineConfig& cfg, const CorpusManifest& manifest);
std::vector<std::string> speaker_ids_from_snapshot(const std::string& snapshot_json);
std::vector<SpeakerProfile> profiles_from_snapshot(const std::string& snapshot_json);

}  // namespace vc::pipeline
