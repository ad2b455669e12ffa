#pragma once

#include <cstdint>
#include <string>

namespace vc::pipeline {

// Two synthetic speakers rendering parallel vowel-like content: pulse trains
// through formant resonators with speaker-distinct formants and pitch
// ranges. Useful for demos and end-to-end self-tests without any external
// dataset.
struct DemoCorpusSpec {
  std::size_t sample_rate = 24000;
  std::size_t utterances_per_speaker = 10;
  std::size_t validation_per_speaker = 2;
  double voiced_sec = 0.45;    // voiced body per utterance
  double silence_sec = 0.06;   // leading/trailing silence
  std::uint64_t seed = 1234;
};

// Writes <dir>/wav/*.wav and <dir>/manifest.json; utterance k is parallel
// content across both speakers. Returns the manifest path.
std::string write_demo_corpus(const std::string& dir, const DemoCorpusSpec& spec);

}  // namespace vc::pipeline
