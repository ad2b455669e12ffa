#include "vc/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "vc/dsp/aperiodicity.hpp"
#include "vc/dsp/wav.hpp"
#include "vc/pipeline/featio.hpp"

namespace vc::pipeline {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

LoadedCorpus load_corpus(const std::string& out_dir, const CorpusManifest& manifest) {
  IngestResult index = load_ingest_index(out_dir);
  const fs::path store(feature_store_dir(out_dir));
  LoadedCorpus corpus;
  for (const auto& item : index.items) {
    if (!item.ok) continue;
    LoadedCorpus::Utterance u;
    FeatureFile f = read_features((store / item.feature_path).string());
    u.seq = std::move(f.seq);
    u.trim_begin = f.trim_begin;
    u.source_frames = f.source_frames;
    u.source = item.source;
    u.speaker = manifest.speaker_by_id(item.speaker).code;
    (item.validation ? corpus.validation : corpus.train).push_back(std::move(u));
  }
  if (corpus.train.empty()) throw std::runtime_error("train: no training utterances in store");
  return corpus;
}

void restore_store(nn::ParameterStore& dst, const nn::ParameterStore& src) {
  if (dst.entries().size() != src.entries().size())
    throw std::runtime_error("checkpoint: parameter count mismatch (config mismatch?)");
  for (auto& [name, e] : dst.entries()) {
    if (!src.has(name)) throw std::runtime_error("checkpoint: missing parameter " + name);
    const auto& s = src.entry(name);
    if (!s.value.same_shape(e.value))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    e.value = s.value;
    e.m = s.m;
    e.v = s.v;
    e.grad.fill(0.0);
  }
}

vae::ModelConfig make_vae_config(const PipelineConfig& cfg, std::size_t n_speakers) {
  vae::ModelConfig mc = cfg.vae;
  mc.mcep_dim = cfg.analysis.mcep_order + 1;
  mc.excitation_dim = 2 + dsp::kApBands;
  mc.n_speakers = n_speakers;
  mc.validate();
  return mc;
}

pwg::VocoderConfig make_vocoder_config(const PipelineConfig& cfg) {
  pwg::VocoderConfig vc = cfg.vocoder;
  vc.sample_rate = cfg.analysis.sample_rate;
  vc.hop = cfg.analysis.hop();
  vc.cond_channels = cfg.analysis.mcep_order + 1 + 2 + dsp::kApBands;
  vc.logf0_channel = cfg.analysis.mcep_order + 1;
  vc.validate();
  return vc;
}

std::vector<std::string> manifest_speaker_ids(const CorpusManifest& manifest) {
  std::vector<std::string> ids;
  for (const auto& s : manifest.speakers) ids.push_back(s.id);
  return ids;
}

namespace {

std::vector<dsp::LogF0Stats> stats_in_manifest_order(const std::string& out_dir,
                                                     const CorpusManifest& manifest) {
  std::vector<SpeakerStats> all = load_stats(out_dir);
  std::vector<dsp::LogF0Stats> out;
  for (const auto& spk : manifest.speakers) {
    bool found = false;
    for (const auto& s : all)
      if (s.id == spk.id) {
        out.push_back(s.logf0);
        found = true;
      }
    if (!found) throw std::runtime_error("train: stats.json lacks speaker '" + spk.id + "'");
  }
  return out;
}

std::pair<nn::Tensor, nn::Tensor> stats_buffers(const std::vector<dsp::LogF0Stats>& stats) {
  nn::Tensor mean({stats.size()}), sd({stats.size()});
  for (std::size_t i = 0; i < stats.size(); ++i) {
    mean[i] = stats[i].mean;
    sd[i] = stats[i].std;
  }
  return {mean, sd};
}

std::vector<dsp::LogF0Stats> stats_from_buffers(const CheckpointData& ckpt) {
  const nn::Tensor& mean = ckpt.buffer("stats.logf0_mean");
  const nn::Tensor& sd = ckpt.buffer("stats.logf0_std");
  std::vector<dsp::LogF0Stats> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) out[i] = {mean[i], sd[i]};
  return out;
}

struct MetricsCsv {
  std::ofstream file;
  explicit MetricsCsv(const std::string& path, const std::string& header, bool append) {
    bool exists = fs::exists(path);
    file.open(path, append && exists ? std::ios::app : std::ios::trunc);
    if (!file) throw std::runtime_error("train: cannot write " + path);
    if (!append || !exists) file << header << "\n";
  }
};

vae::CycleVae::EvalMetrics mean_metrics(vae::CycleVae& model,
                                        const std::vector<LoadedCorpus::Utterance>& utts) {
  vae::CycleVae::EvalMetrics mean;
  if (utts.empty()) return mean;
  for (const auto& u : utts) {
    auto m = model.evaluate_utterance(u.seq, vae::SpeakerCode(u.speaker, model.config().n_speakers));
    mean.rec_mcd += m.rec_mcd;
    mean.cyc_mcd += m.cyc_mcd;
    mean.kl_x += m.kl_x;
    mean.kl_y += m.kl_y;
    mean.spk_acc_x += m.spk_acc_x;
    mean.spk_acc_y += m.spk_acc_y;
    mean.total += m.total;
  }
  double inv = 1.0 / static_cast<double>(utts.size());
  mean.rec_mcd *= inv;
  mean.cyc_mcd *= inv;
  mean.kl_x *= inv;
  mean.kl_y *= inv;
  mean.spk_acc_x *= inv;
  mean.spk_acc_y *= inv;
  mean.total *= inv;
  return mean;
}

void write_metric_row(std::ofstream& f, std::size_t epoch,
                      const vae::CycleVae::EvalMetrics& m) {
  f << epoch << "," << format_double(m.rec_mcd) << "," << format_double(m.cyc_mcd) << ","
    << format_double(m.kl_x) << "," << format_double(m.kl_y) << ","
    << format_double(m.spk_acc_x) << "," << format_double(m.spk_acc_y) << ","
    << format_double(m.total) << "\n";
}

}  // namespace

TrainVaeResult train_vae(const CorpusManifest& manifest, const PipelineConfig& cfg,
                         const std::string& out_dir, std::uint64_t seed,
                         const std::string& resume_checkpoint) {
  manifest.validate();
  LoadedCorpus corpus = load_corpus(out_dir, manifest);
  std::vector<dsp::LogF0Stats> stats = stats_in_manifest_order(out_dir, manifest);
  std::vector<std::string> ids = manifest_speaker_ids(manifest);
  const std::string snapshot = vae_config_snapshot(cfg, manifest);

  vae::CycleVae model(make_vae_config(cfg, manifest.speakers.size()));
  model.set_speaker_stats(stats);

  nn::Rng rng(seed);
  std::size_t start_epoch = 0;
  std::size_t steps = 0;
  bool resuming = false;
  if (!resume_checkpoint.empty()) {
    CheckpointData ckpt = load_checkpoint(resume_checkpoint, kKindVae);
    if (ckpt.config_json != snapshot)
      throw std::runtime_error("train_vae: resume config mismatch with " + resume_checkpoint);
    restore_store(model.params(), ckpt.store("model"));
    model.adam_steps() = ckpt.adam_steps.at(0);
    rng.set_state(ckpt.rng_state);
    start_epoch = ckpt.epoch;
    steps = ckpt.step;
    resuming = true;
  } else {
    model.init_params(rng);
  }

  fs::create_directories(out_dir);
  MetricsCsv train_csv((fs::path(out_dir) / "vae_train_metrics.csv").string(),
                       "epoch,rec_mcd,cyc_mcd,kl_x,kl_y,spk_acc_x,spk_acc_y,total", resuming);
  MetricsCsv val_csv((fs::path(out_dir) / "vae_val_metrics.csv").string(),
                     "epoch,rec_mcd,cyc_mcd,kl_x,kl_y,spk_acc_x,spk_acc_y,total", resuming);

  nn::AdamConfig adam;
  adam.lr = cfg.vae_train.lr;

  auto save = [&](const std::string& name, std::size_t epoch) {
    CheckpointData ckpt;
    ckpt.kind = kKindVae;
    ckpt.config_json = snapshot;
    ckpt.stores.emplace_back("model", model.params());
    ckpt.adam_steps.push_back(model.adam_steps());
    auto [mean, sd] = stats_buffers(stats);
    ckpt.buffers.emplace_back("stats.logf0_mean", mean);
    ckpt.buffers.emplace_back("stats.logf0_std", sd);
    ckpt.rng_state = rng.state();
    ckpt.step = steps;
    ckpt.epoch = epoch;
    std::string path = (fs::path(out_dir) / name).string();
    save_checkpoint(path, ckpt);
    return path;
  };

  TrainVaeResult result;
  std::size_t epoch = start_epoch;
  bool step_cap_hit = steps >= cfg.vae_train.max_steps;
  while (epoch < cfg.vae_train.epochs && !step_cap_hit) {
    ++epoch;
    // Fisher-Yates over training order
    std::vector<std::size_t> order(corpus.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t pos = 0; pos < order.size() && !step_cap_hit;
         pos += cfg.vae_train.batch_size) {
      std::vector<vae::CycleVae::TrainItem> batch;
      for (std::size_t k = pos; k < std::min(order.size(), pos + cfg.vae_train.batch_size); ++k)
        batch.push_back({&corpus.train[order[k]].seq, corpus.train[order[k]].speaker});
      model.train_step(batch, rng, adam, cfg.vae_train.grad_clip);
      if (++steps >= cfg.vae_train.max_steps) step_cap_hit = true;
    }

    write_metric_row(train_csv.file, epoch, mean_metrics(model, corpus.train));
    write_metric_row(val_csv.file, epoch, mean_metrics(model, corpus.validation));
    train_csv.file.flush();
    val_csv.file.flush();

    if (epoch % cfg.vae_train.checkpoint_every == 0)
      save("vae_epoch_" + std::to_string(epoch) + ".vcck", epoch);
  }
  result.final_checkpoint = save("vae_final.vcck", epoch);
  result.epochs_run = epoch;
  result.steps_run = steps;
  return result;
}

std::vector<double> aligned_waveform(const LoadedCorpus::Utterance& utt, std::size_t hop) {
  dsp::Waveform w = dsp::wav_read(utt.source);
  const std::size_t frames = utt.seq.frames();
  const std::size_t begin = utt.trim_begin * hop;
  std::vector<double> out(frames * hop, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t src = begin + i;
    if (src < w.samples.size()) out[i] = w.samples[src];
  }
  return out;
}

pwg::AugmentedBatch build_augmented_batch(const LoadedCorpus::Utterance& utt,
                                          vae::CycleVae& model, std::size_t n_pivots,
                                          const std::vector<double>& aligned_wave,
                                          std::size_t hop) {
  const auto& mc = model.config();
  const std::size_t t = utt.seq.frames();
  if (aligned_wave.size() != t * hop)
    throw std::invalid_argument("build_augmented_batch: waveform/frame mismatch");
  pwg::AugmentedBatch batch;
  batch.waveform = aligned_wave;
  batch.natural.provenance = pwg::ConditioningSequence::Provenance::natural;
  batch.natural.features = vae::feature_matrix(utt.seq);

  // first-cycle reconstructed and cyclically reconstructed spectra,
  // deterministic latents (z = posterior location)
  vae::SpeakerCode src(utt.speaker, mc.n_speakers);
  std::vector<std::size_t> pivots;
  for (std::size_t p = 0; p < mc.n_speakers && pivots.size() < n_pivots; ++p)
    if (p != utt.speaker) pivots.push_back(p);

  vae::LatentPosterior post = model.encode(utt.seq);
  nn::Tensor rec_sp = model.decode(post.mu, src);

  pwg::ConditioningSequence rec;
  rec.provenance = pwg::ConditioningSequence::Provenance::reconstructed;
  rec.features = batch.natural.features;
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t d = 0; d < mc.mcep_dim; ++d) rec.features.at(r, d) = rec_sp.at(r, d);
  batch.reconstructed = std::move(rec);

  for (std::size_t p : pivots) {
    vae::SpeakerCode pivot(p, mc.n_speakers);
    nn::Tensor conv_sp = model.decode(post.mu, pivot);
    // pivot-conditioned features with transformed excitation, re-encoded
    dsp::AcousticFrameSequence y = utt.seq;
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t d = 0; d < mc.mcep_dim; ++d) y.mcep[r * mc.mcep_dim + d] = conv_sp.at(r, d);
      y.log_f0[r] = dsp::transform_log_f0(utt.seq.log_f0[r], model.speaker_stats(utt.speaker),
                                          model.speaker_stats(p));
    }
    vae::LatentPosterior post_y = model.encode(y);
    nn::Tensor cyc_sp = model.decode(post_y.mu, src);

    pwg::ConditioningSequence cyc;
    cyc.provenance = pwg::ConditioningSequence::Provenance::cyclic;
    cyc.pivot = p;
    cyc.features = batch.natural.features;
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t d = 0; d < mc.mcep_dim; ++d) cyc.features.at(r, d) = cyc_sp.at(r, d);
    batch.cyclic.push_back(std::move(cyc));
  }
  return batch;
}

TrainVocoderResult train_vocoder(const CorpusManifest& manifest, const PipelineConfig& cfg,
                                 const std::string& out_dir, std::uint64_t seed,
                                 const std::string& vae_checkpoint) {
  manifest.validate();
  if (vae_checkpoint.empty())
    throw std::runtime_error("train_vocoder: a CycleVAE checkpoint is required");
  LoadedCorpus corpus = load_corpus(out_dir, manifest);
  std::vector<std::string> ids = manifest_speaker_ids(manifest);

  // frozen spectral model for augmentation
  LoadedVae vae = load_vae(vae_checkpoint);
  if (vae.speaker_ids != ids)
    throw std::runtime_error("train_vocoder: speaker set mismatch with VAE checkpoint");

  pwg::VocoderConfig vcfg = make_vocoder_config(cfg);
  pwg::Vocoder voc(vcfg);
  nn::Rng rng(seed);
  voc.init_params(rng);

  const std::size_t n_pivots =
      cfg.vocoder_train.pivots == 0 ? manifest.speakers.size() - 1 : cfg.vocoder_train.pivots;

  // precompute augmentation variants and aligned waveforms
  std::vector<pwg::AugmentedBatch> batches;
  for (const auto& utt : corpus.train) {
    std::vector<double> wave = aligned_waveform(utt, vcfg.hop);
    batches.push_back(build_augmented_batch(utt, *vae.model, n_pivots, wave, vcfg.hop));
  }

  // per-channel normalization from the natural training features
  {
    nn::Tensor mean({vcfg.cond_channels}), sd({vcfg.cond_channels});
    std::size_t n = 0;
    for (const auto& b : batches) n += b.natural.frames();
    for (std::size_t c = 0; c < vcfg.cond_channels; ++c) {
      double acc = 0.0;
      for (const auto& b : batches)
        for (std::size_t r = 0; r < b.natural.frames(); ++r) acc += b.natural.features.at(r, c);
      mean[c] = acc / static_cast<double>(n);
      double var = 0.0;
      for (const auto& b : batches)
        for (std::size_t r = 0; r < b.natural.frames(); ++r) {
          double d = b.natural.features.at(r, c) - mean[c];
          var += d * d;
        }
      sd[c] = std::max(std::sqrt(var / static_cast<double>(n)), 1e-6);
    }
    voc.set_cond_stats(std::move(mean), std::move(sd));
  }

  const std::string snapshot = vocoder_config_snapshot(cfg, manifest);
  fs::create_directories(out_dir);
  MetricsCsv csv((fs::path(out_dir) / "vocoder_metrics.csv").string(),
                 "step,stft_loss,adv_loss,disc_loss", false);

  auto save = [&](const std::string& name, std::size_t step) {
    CheckpointData ckpt;
    ckpt.kind = kKindVocoder;
    ckpt.config_json = snapshot;
    ckpt.stores.emplace_back("gen", voc.gen_params());
    ckpt.stores.emplace_back("disc", voc.disc_params());
    ckpt.adam_steps.push_back(voc.gen_adam_steps());
    ckpt.adam_steps.push_back(voc.disc_adam_steps());
    ckpt.buffers.emplace_back("cond.mean", voc.cond_mean());
    ckpt.buffers.emplace_back("cond.std", voc.cond_std());
    ckpt.rng_state = rng.state();
    ckpt.step = step;
    std::string path = (fs::path(out_dir) / name).string();
    save_checkpoint(path, ckpt);
    return path;
  };

  const std::size_t total_steps = vcfg.pretrain_steps + vcfg.adversarial_steps;
  TrainVocoderResult result;
  for (std::size_t step = 0; step < total_steps; ++step) {
    const pwg::AugmentedBatch& batch = batches[rng.below(batches.size())];
    pwg::Vocoder::StepReport rep = voc.train_step(batch, step, rng);
    if ((step + 1) % cfg.vocoder_train.log_every == 0 || step + 1 == total_steps) {
      csv.file << (step + 1) << "," << format_double(rep.stft) << ",";
      if (rep.adversarial)
        csv.file << format_double(rep.adv_g) << "," << format_double(rep.loss_d);
      else
        csv.file << ",";
      csv.file << "\n";
      csv.file.flush();
    }
    if ((step + 1) % cfg.vocoder_train.checkpoint_every == 0)
      save("vocoder_step_" + std::to_string(step + 1) + ".vcck", step + 1);
  }
  result.final_checkpoint = save("vocoder_final.vcck", total_steps);
  result.steps_run = total_steps;
  return result;
}

LoadedVae load_vae(const std::string& checkpoint_path) {
  CheckpointData ckpt = load_checkpoint(checkpoint_path, kKindVae);
  LoadedVae out;
  out.cfg = pipeline_config_from_json_text(ckpt.config_json);
  out.speaker_ids = speaker_ids_from_snapshot(ckpt.config_json);
  out.profiles = profiles_from_snapshot(ckpt.config_json);
  out.model = std::make_unique<vae::CycleVae>(make_vae_config(out.cfg, out.speaker_ids.size()));
  restore_store(out.model->params(), ckpt.store("model"));
  out.model->adam_steps() = ckpt.adam_steps.at(0);
  out.stats = stats_from_buffers(ckpt);
  out.model->set_speaker_stats(out.stats);
  return out;
}

LoadedVocoder load_vocoder(const std::string& checkpoint_path) {
  CheckpointData ckpt = load_checkpoint(checkpoint_path, kKindVocoder);
  LoadedVocoder out;
  out.cfg = pipeline_config_from_json_text(ckpt.config_json);
  out.speaker_ids = speaker_ids_from_snapshot(ckpt.config_json);
  out.model = std::make_unique<pwg::Vocoder>(make_vocoder_config(out.cfg));
  restore_store(out.model->gen_params(), ckpt.store("gen"));
  restore_store(out.model->disc_params(), ckpt.store("disc"));
  out.model->gen_adam_steps() = ckpt.adam_steps.at(0);
  out.model->disc_adam_steps() = ckpt.adam_steps.at(1);
  out.model->set_cond_stats(ckpt.buffer("cond.mean"), ckpt.buffer("cond.std"));
  return out;
}

}  // namespace vc::pipeline
