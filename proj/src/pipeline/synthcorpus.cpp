#include "vc/pipeline/synthcorpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "vc/dsp/wav.hpp"
#include "vc/nn/random.hpp"

namespace vc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SpeakerVoice {
  std::string id;
  double f0_low, f0_high;       // per-utterance base pitch range
  double formants[3];           // resonator centers, Hz
  double bandwidths[3];         // resonator bandwidths, Hz
  double f0_min, f0_max;        // manifest annotation
};

// two-pole resonator bank applied to a pulse train
std::vector<double> render_voice(const SpeakerVoice& voice, double base_f0, double glide_rate,
                                 double glide_phase, const DemoCorpusSpec& spec,
                                 vc::nn::Rng& rng) {
  const double sr = static_cast<double>(spec.sample_rate);
  const std::size_t n_sil = static_cast<std::size_t>(spec.silence_sec * sr);
  const std::size_t n_voiced = static_cast<std::size_t>(spec.voiced_sec * sr);
  const std::size_t n = n_voiced + 2 * n_sil;

  // pulse train with a slow pitch contour
  std::vector<double> excitation(n, 0.0);
  double phase = 0.0;
  for (std::size_t i = 0; i < n_voiced; ++i) {
    double t = static_cast<double>(i) / sr;
    double f0 = base_f0 * (1.0 + 0.05 * std::sin(2.0 * kPi * 1.9 * t + glide_phase));
    phase += f0 / sr;
    if (phase >= 1.0) {
      phase -= 1.0;
      excitation[n_sil + i] = 1.0;
    }
  }
  // small noise floor so frames are never digitally silent inside the body
  for (std::size_t i = n_sil; i < n_sil + n_voiced; ++i)
    excitation[i] += 2e-2 * (2.0 * rng.uniform01() - 1.0);

  // parallel formant resonators with shared content glide
  std::vector<double> out(n, 0.0);
  const double weights[3] = {1.0, 0.6, 0.35};
  for (int f = 0; f < 3; ++f) {
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / sr;
      double glide = 1.0 + 0.06 * std::sin(2.0 * kPi * glide_rate * t + glide_phase);
      double freq = voice.formants[f] * glide;
      double r = std::exp(-kPi * voice.bandwidths[f] / sr);
      double theta = 2.0 * kPi * freq / sr;
      double a1 = 2.0 * r * std::cos(theta);
      double a2 = -r * r;
      double b0 = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
      double y = b0 * excitation[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      out[i] += weights[f] * y;
    }
  }

  // raised-cosine attack/decay over the voiced body
  const std::size_t ramp = static_cast<std::size_t>(0.03 * sr);
  for (std::size_t i = 0; i < n; ++i) {
    double env = 0.0;
    if (i >= n_sil && i < n_sil + n_voiced) {
      std::size_t k = i - n_sil;
      env = 1.0;
      if (k < ramp) env = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(k) / ramp);
      std::size_t tail = n_voiced - 1 - k;
      if (tail < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(kPi * static_cast<double>(tail) / ramp));
    }
    out[i] *= env;
  }

  double peak = 1e-9;
  for (double v : out) peak = std::max(peak, std::fabs(v));
  for (double& v : out) v *= 0.6 / peak;
  return out;
}

}  // namespace

std::string write_demo_corpus(const std::string& dir, const DemoCorpusSpec& spec) {
  const SpeakerVoice voices[2] = {
      {"spk_a", 112.0, 134.0, {650.0, 1150.0, 2600.0}, {90.0, 110.0, 170.0}, 70.0, 260.0},
      {"spk_b", 215.0, 255.0, {400.0, 2100.0, 3100.0}, {80.0, 130.0, 180.0}, 140.0, 420.0},
  };
  fs::create_directories(fs::path(dir) / "wav");

  json speakers = json::array();
  for (const auto& voice : voices) {
    json train = json::array(), validation = json::array();
    for (std::size_t u = 0; u < spec.utterances_per_speaker; ++u) {
      // content index u is parallel across speakers: same glide + phase
      double frac = spec.utterances_per_speaker > 1
                        ? static_cast<double>(u) / (spec.utterances_per_speaker - 1)
                        : 0.5;
      double base_f0 = voice.f0_low + frac * (voice.f0_high - voice.f0_low);
      double glide_rate = 0.6 + 0.17 * static_cast<double>(u);
      double glide_phase = 0.7 * static_cast<double>(u);

      vc::nn::Rng utt_rng(spec.seed * 1000 + u);  // shared across speakers on purpose
      std::vector<double> samples = render_voice(voice, base_f0, glide_rate, glide_phase, spec,
                                                 utt_rng);
      dsp::Waveform w;
      w.sample_rate = spec.sample_rate;
      w.samples = std::move(samples);
      std::string name = voice.id + "_u" + std::to_string(u) + ".wav";
      dsp::wav_write((fs::path(dir) / "wav" / name).string(), w);
      std::string rel = (fs::path("wav") / name).string();
      if (u + spec.validation_per_speaker >= spec.utterances_per_speaker)
        validation.push_back(rel);
      else
        train.push_back(rel);
    }
    speakers.push_back({{"id", voice.id},
                        {"f0_min", voice.f0_min},
                        {"f0_max", voice.f0_max},
                        {"power_threshold_db", -40.0},
                        {"train", train},
                        {"validation", validation}});
  }
  json manifest = {{"sample_rate", spec.sample_rate}, {"speakers", speakers}};
  std::string path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(path);
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("demo corpus: cannot write manifest");
  return path;
}

}  // namespace vc::pipeline
