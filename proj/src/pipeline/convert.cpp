#include "vc/pipeline/convert.hpp"

#include <stdexcept>

#include "vc/dsp/wav.hpp"
#include "vc/pipeline/train.hpp"

namespace vc::pipeline {

ConvertResult convert_utterance(const std::string& wav_path, const std::string& source_id,
                                const std::string& target_id, const std::string& vae_checkpoint,
                                const std::string& vocoder_checkpoint, const std::string& out_wav,
                                std::uint64_t seed) {
  LoadedVae vae = load_vae(vae_checkpoint);
  LoadedVocoder voc = load_vocoder(vocoder_checkpoint);
  if (voc.speaker_ids != vae.speaker_ids)
    throw std::runtime_error("convert: checkpoints were trained on different speaker sets");

  auto find = [&](const std::string& id) -> const SpeakerProfile& {
    for (const auto& p : vae.profiles)
      if (p.id == id) return p;
    throw std::runtime_error("convert: unknown speaker id '" + id + "'");
  };
  const SpeakerProfile& src = find(source_id);
  const SpeakerProfile& tgt = find(target_id);

  dsp::Waveform w = dsp::wav_read(wav_path);
  dsp::AnalysisConfig analysis = vae.cfg.analysis;
  analysis.f0_min = src.f0_min;
  analysis.f0_max = src.f0_max;
  dsp::AcousticFrameSequence seq = dsp::analyze_utterance(w, analysis);
  seq = dsp::trim_silence(seq, src.power_threshold_db);

  const std::size_t s = vae.speaker_ids.size();
  dsp::AcousticFrameSequence converted =
      vae.model->convert(seq, vae::SpeakerCode(src.code, s), vae::SpeakerCode(tgt.code, s),
                         vae.stats[src.code], vae.stats[tgt.code]);

  pwg::ConditioningSequence cond;
  cond.provenance = pwg::ConditioningSequence::Provenance::natural;
  cond.features = vae::feature_matrix(converted);

  nn::Rng rng(seed);
  dsp::Waveform out = voc.model->synthesize(cond, rng);
  dsp::wav_write(out_wav, out);

  ConvertResult r;
  r.out_wav = out_wav;
  r.frames = converted.frames();
  r.duration_sec = out.duration_sec();
  return r;
}

}  // namespace vc::pipeline
