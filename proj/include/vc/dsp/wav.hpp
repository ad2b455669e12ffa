#pragma once

#include <string>
#include <vector>

namespace vc::dsp {

// Mono waveform, samples nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  std::size_t sample_rate = 24000;

  double duration_sec() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Reads a mono WAV file: PCM 16-bit little-endian or IEEE float-32. The file's
// own sample rate is returned as-is; rate policy belongs to the caller.
Waveform wav_read(const std::string& path);

// Writes mono PCM-16; samples are clamped to [-1, 1].
void wav_write(const std::string& path, const Waveform& w);

}  // namespace vc::dsp
