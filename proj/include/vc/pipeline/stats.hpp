#pragma once

#include <string>
#include <vector>

#include "vc/dsp/f0.hpp"
#include "vc/pipeline/ingest.hpp"
#include "vc/pipeline/manifest.hpp"

namespace vc::pipeline {

struct SpeakerStats {
  std::string id;
  dsp::LogF0Stats logf0;
  std::size_t voiced_frames = 0;
  double power_db_mean = 0.0;  // relative frame power over train utterances
  double power_db_max = 0.0;
};

// Voiced log-F0 and power statistics over one speaker's TRAINING split.
SpeakerStats compute_stats(const std::string& out_dir, const IngestResult& index,
                           const std::string& speaker_id);

// All speakers, manifest order; writes <out_dir>/stats.json.
std::vector<SpeakerStats> compute_all_stats(const std::string& out_dir,
                                            const CorpusManifest& manifest);

std::vector<SpeakerStats> load_stats(const std::string& out_dir);

}  // namespace vc::pipeline
