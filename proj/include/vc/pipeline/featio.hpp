#pragma once

#include <string>

#include "vc/dsp/features.hpp"

namespace vc::pipeline {

// Binary feature container, magic "VCFT", little-endian. Layout:
//   magic[4] | u32 version | u32 frames | u32 mcep_dim | u32 ap_dim |
//   u32 sample_rate | f64 frame_shift_ms | u32 trim_begin | u32 source_frames |
//   frames x (mcep_dim + 2 + ap_dim) f64 rows [mcep..., log_f0, uv, ap...]
// trim_begin / source_frames record where the kept frames sat in the
// untrimmed utterance so waveforms can be re-aligned.
struct FeatureFile {
  dsp::AcousticFrameSequence seq;
  std::uint32_t trim_begin = 0;
  std::uint32_t source_frames = 0;
};

inline constexpr std::uint32_t kFeatureVersion = 1;

void write_features(const std::string& path, const FeatureFile& f);
FeatureFile read_features(const std::string& path);

}  // namespace vc::pipeline
