#include "vc/pipeline/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vc::pipeline {

using nlohmann::json;

namespace {

json analysis_to_json(const dsp::AnalysisConfig& a) {
  return {{"sample_rate", a.sample_rate},
          {"fft_size", a.fft_size},
          {"window_length", a.window_length},
          {"frame_shift_ms", a.frame_shift_ms},
          {"mcep_order", a.mcep_order},
          {"alpha", a.alpha},
          {"f0_min", a.f0_min},
          {"f0_max", a.f0_max},
          {"clarity_threshold", a.clarity_threshold},
          {"ap_fft_size", a.ap_fft_size},
          {"ap_window_length", a.ap_window_length}};
}

void analysis_from_json(const json& j, dsp::AnalysisConfig& a) {
  a.sample_rate = j.value("sample_rate", a.sample_rate);
  a.fft_size = j.value("fft_size", a.fft_size);
  a.window_length = j.value("window_length", a.window_length);
  a.frame_shift_ms = j.value("frame_shift_ms", a.frame_shift_ms);
  a.mcep_order = j.value("mcep_order", a.mcep_order);
  a.alpha = j.value("alpha", a.alpha);
  a.f0_min = j.value("f0_min", a.f0_min);
  a.f0_max = j.value("f0_max", a.f0_max);
  a.clarity_threshold = j.value("clarity_threshold", a.clarity_threshold);
  a.ap_fft_size = j.value("ap_fft_size", a.ap_fft_size);
  a.ap_window_length = j.value("ap_window_length", a.ap_window_length);
}

json vae_to_json(const vae::ModelConfig& m) {
  return {{"mcep_dim", m.mcep_dim},
          {"excitation_dim", m.excitation_dim},
          {"latent_dim", m.latent_dim},
          {"n_speakers", m.n_speakers},
          {"n_cycles", m.n_cycles},
          {"conv_channels", m.conv_channels},
          {"conv_kernel", m.conv_kernel},
          {"hidden", m.hidden},
          {"encoder_feedback", m.encoder_feedback},
          {"decoder_feedback", m.decoder_feedback},
          {"bptt_truncation", m.bptt_truncation},
          {"w_rec", m.w_rec},
          {"w_cyc", m.w_cyc},
          {"w_kl", m.w_kl},
          {"w_ce", m.w_ce},
          {"w_pow", m.w_pow}};
}

void vae_from_json(const json& j, vae::ModelConfig& m) {
  m.mcep_dim = j.value("mcep_dim", m.mcep_dim);
  m.excitation_dim = j.value("excitation_dim", m.excitation_dim);
  m.latent_dim = j.value("latent_dim", m.latent_dim);
  m.n_speakers = j.value("n_speakers", m.n_speakers);
  m.n_cycles = j.value("n_cycles", m.n_cycles);
  m.conv_channels = j.value("conv_channels", m.conv_channels);
  m.conv_kernel = j.value("conv_kernel", m.conv_kernel);
  m.hidden = j.value("hidden", m.hidden);
  m.encoder_feedback = j.value("encoder_feedback", m.encoder_feedback);
  m.decoder_feedback = j.value("decoder_feedback", m.decoder_feedback);
  m.bptt_truncation = j.value("bptt_truncation", m.bptt_truncation);
  m.w_rec = j.value("w_rec", m.w_rec);
  m.w_cyc = j.value("w_cyc", m.w_cyc);
  m.w_kl = j.value("w_kl", m.w_kl);
  m.w_ce = j.value("w_ce", m.w_ce);
  m.w_pow = j.value("w_pow", m.w_pow);
}

json vocoder_to_json(const pwg::VocoderConfig& v) {
  json res = json::array();
  for (const auto& r : v.resolutions)
    res.push_back({{"fft_size", r.fft_size}, {"hop", r.hop}, {"win_length", r.win_length}});
  return {{"sample_rate", v.sample_rate},
          {"hop", v.hop},
          {"cond_channels", v.cond_channels},
          {"residual_channels", v.residual_channels},
          {"skip_channels", v.skip_channels},
          {"layers", v.layers},
          {"dilation_cycles", v.dilation_cycles},
          {"kernel", v.kernel},
          {"disc_layers", v.disc_layers},
          {"disc_channels", v.disc_channels},
          {"disc_kernel", v.disc_kernel},
          {"leaky_slope", v.leaky_slope},
          {"resolutions", res},
          {"lambda_adv", v.lambda_adv},
          {"phase_conditioning", v.phase_conditioning},
          {"logf0_channel", v.logf0_channel},
          {"pretrain_steps", v.pretrain_steps},
          {"adversarial_steps", v.adversarial_steps},
          {"segment_frames", v.segment_frames},
          {"lr_gen", v.lr_gen},
          {"lr_warmup_steps", v.lr_warmup_steps},
          {"lr_disc", v.lr_disc},
          {"grad_clip", v.grad_clip}};
}

void vocoder_from_json(const json& j, pwg::VocoderConfig& v) {
  v.sample_rate = j.value("sample_rate", v.sample_rate);
  v.hop = j.value("hop", v.hop);
  v.cond_channels = j.value("cond_channels", v.cond_channels);
  v.residual_channels = j.value("residual_channels", v.residual_channels);
  v.skip_channels = j.value("skip_channels", v.skip_channels);
  v.layers = j.value("layers", v.layers);
  v.dilation_cycles = j.value("dilation_cycles", v.dilation_cycles);
  v.kernel = j.value("kernel", v.kernel);
  v.disc_layers = j.value("disc_layers", v.disc_layers);
  v.disc_channels = j.value("disc_channels", v.disc_channels);
  v.disc_kernel = j.value("disc_kernel", v.disc_kernel);
  v.leaky_slope = j.value("leaky_slope", v.leaky_slope);
  if (j.contains("resolutions")) {
    v.resolutions.clear();
    for (const auto& r : j["resolutions"])
      v.resolutions.push_back({r.at("fft_size").get<std::size_t>(),
                               r.at("hop").get<std::size_t>(),
                               r.at("win_length").get<std::size_t>()});
  }
  v.lambda_adv = j.value("lambda_adv", v.lambda_adv);
  v.phase_conditioning = j.value("phase_conditioning", v.phase_conditioning);
  v.logf0_channel = j.value("logf0_channel", v.logf0_channel);
  v.pretrain_steps = j.value("pretrain_steps", v.pretrain_steps);
  v.adversarial_steps = j.value("adversarial_steps", v.adversarial_steps);
  v.segment_frames = j.value("segment_frames", v.segment_frames);
  v.lr_gen = j.value("lr_gen", v.lr_gen);
  v.lr_warmup_steps = j.value("lr_warmup_steps", v.lr_warmup_steps);
  v.lr_disc = j.value("lr_disc", v.lr_disc);
  v.grad_clip = j.value("grad_clip", v.grad_clip);
}

json options_to_json(const PipelineConfig& c) {
  return {{"analysis", analysis_to_json(c.analysis)},
          {"vae", vae_to_json(c.vae)},
          {"vocoder", vocoder_to_json(c.vocoder)},
          {"vae_train",
           {{"epochs", c.vae_train.epochs},
            {"max_steps", c.vae_train.max_steps},
            {"batch_size", c.vae_train.batch_size},
            {"checkpoint_every", c.vae_train.checkpoint_every},
            {"lr", c.vae_train.lr},
            {"grad_clip", c.vae_train.grad_clip}}},
          {"vocoder_train",
           {{"checkpoint_every", c.vocoder_train.checkpoint_every},
            {"log_every", c.vocoder_train.log_every},
            {"pivots", c.vocoder_train.pivots}}}};
}

}  // namespace

PipelineConfig pipeline_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: parse error: ") + e.what());
  }
  PipelineConfig c;
  if (j.contains("analysis")) analysis_from_json(j["analysis"], c.analysis);
  if (j.contains("vae")) vae_from_json(j["vae"], c.vae);
  if (j.contains("vocoder")) vocoder_from_json(j["vocoder"], c.vocoder);
  if (j.contains("vae_train")) {
    const auto& t = j["vae_train"];
    c.vae_train.epochs = t.value("epochs", c.vae_train.epochs);
    c.vae_train.max_steps = t.value("max_steps", c.vae_train.max_steps);
    c.vae_train.batch_size = t.value("batch_size", c.vae_train.batch_size);
    c.vae_train.checkpoint_every = t.value("checkpoint_every", c.vae_train.checkpoint_every);
    c.vae_train.lr = t.value("lr", c.vae_train.lr);
    c.vae_train.grad_clip = t.value("grad_clip", c.vae_train.grad_clip);
  }
  if (j.contains("vocoder_train")) {
    const auto& t = j["vocoder_train"];
    c.vocoder_train.checkpoint_every = t.value("checkpoint_every", c.vocoder_train.checkpoint_every);
    c.vocoder_train.log_every = t.value("log_every", c.vocoder_train.log_every);
    c.vocoder_train.pivots = t.value("pivots", c.vocoder_train.pivots);
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pipeline_config_from_json_text(text);
}

std::string pipeline_config_to_json_text(const PipelineConfig& cfg) {
  return options_to_json(cfg).dump(2);
}

namespace {

json profiles_to_json(const CorpusManifest& manifest) {
  json out = json::array();
  for (const auto& s : manifest.speakers)
    out.push_back({{"id", s.id},
                   {"f0_min", s.f0_min},
                   {"f0_max", s.f0_max},
                   {"power_threshold_db", s.power_threshold_db}});
  return out;
}

}  // namespace

std::string vae_config_snapshot(const PipelineConfig& cfg, const CorpusManifest& manifest) {
  json j = {{"analysis", analysis_to_json(cfg.analysis)},
            {"vae", vae_to_json(cfg.vae)},
            {"profiles", profiles_to_json(manifest)}};
  return j.dump();
}

std::string vocoder_config_snapshot(const PipelineConfig& cfg, const CorpusManifest& manifest) {
  json j = {{"analysis", analysis_to_json(cfg.analysis)},
            {"vocoder", vocoder_to_json(cfg.vocoder)},
            {"profiles", profiles_to_json(manifest)}};
  return j.dump();
}

std::vector<SpeakerProfile> profiles_from_snapshot(const std::string& snapshot_json) {
  json j = json::parse(snapshot_json);
  std::vector<SpeakerProfile> out;
  std::size_t code = 0;
  for (const auto& js : j.at("profiles")) {
    SpeakerProfile p;
    p.id = js.at("id").get<std::string>();
    p.code = code++;
    p.f0_min = js.at("f0_min").get<double>();
    p.f0_max = js.at("f0_max").get<double>();
    p.power_threshold_db = js.at("power_threshold_db").get<double>();
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> speaker_ids_from_snapshot(const std::string& snapshot_json) {
  std::vector<std::string> ids;
  for (const auto& p : profiles_from_snapshot(snapshot_json)) ids.push_back(p.id);
  return ids;
}

}  // namespace vc::pipeline
