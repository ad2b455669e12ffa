#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vc/dsp/f0.hpp"

namespace vc::pipeline {

// Per-speaker annotations plus computed statistics. The one-hot code index
// is the speaker's position in the manifest.
struct SpeakerProfile {
  std::string id;
  std::size_t code = 0;
  double f0_min = 70.0;
  double f0_max = 400.0;
  double power_threshold_db = -40.0;
  std::optional<dsp::LogF0Stats> stats;

  std::vector<std::string> train;       // wav paths
  std::vector<std::string> validation;  // wav paths, disjoint from train
};

struct CorpusManifest {
  std::size_t sample_rate = 24000;
  std::vector<SpeakerProfile> speakers;

  const SpeakerProfile& speaker_by_id(const std::string& id) const;
  void validate() const;
};

// Loads and validates a JSON manifest; wav paths are resolved relative to
// the manifest's directory.
CorpusManifest load_manifest(const std::string& path);

}  // namespace vc::pipeline
