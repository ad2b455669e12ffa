#pragma once

#include <cstdint>
#include <string>

namespace vc::pipeline {

struct ConvertResult {
  std::string out_wav;
  std::size_t frames = 0;
  double duration_sec = 0.0;
};

// End-to-end conversion: extract -> trim -> CycleVAE convert -> vocoder
// synthesize -> PCM-16 WAV. Speaker ids, analysis settings, and statistics
// come from the checkpoints; the output duration is exactly
// frames * frame shift.
ConvertResult convert_utterance(const std::string& wav_path, const std::string& source_id,
                                const std::string& target_id, const std::string& vae_checkpoint,
                                const std::string& vocoder_checkpoint, const std::string& out_wav,
                                std::uint64_t seed);

}  // namespace vc::pipeline
