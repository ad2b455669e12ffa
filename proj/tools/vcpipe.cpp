// Voice-conversion pipeline CLI: dataset ingestion, speaker statistics,
// CycleVAE and vocoder training, end-to-end conversion, and objective
// evaluation. Errors leave on stderr as a single JSON line with exit code 1.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vc/pipeline/checkpoint.hpp"
#include "vc/pipeline/config.hpp"
#include "vc/pipeline/convert.hpp"
#include "vc/pipeline/evaluate.hpp"
#include "vc/pipeline/ingest.hpp"
#include "vc/pipeline/manifest.hpp"
#include "vc/pipeline/stats.hpp"
#include "vc/pipeline/train.hpp"

using namespace vc;
using nlohmann::json;

namespace {

struct GlobalArgs {
  std::uint64_t seed = 0;
  std::string config;
  std::string out_dir = "out";
};

pipeline::PipelineConfig load_config(const GlobalArgs& g) {
  if (g.config.empty()) return pipeline::PipelineConfig{};
  return pipeline::load_pipeline_config(g.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CycleVAE + GAN-vocoder voice conversion pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--seed", g.seed, "Random seed for every stochastic stage");
  app.add_option("--config", g.config, "Pipeline configuration JSON");
  app.add_option("--out-dir", g.out_dir, "Working directory for features, checkpoints, metrics");

  std::string manifest_path, resume, vae_ckpt, voc_ckpt, input, output, source_id, target_id;
  std::string pairs_path, ckpt_path;
  double eval_f0_min = 60.0, eval_f0_max = 500.0, eval_trim_db = -40.0;

  CLI::App* c_ingest = app.add_subcommand("ingest", "Extract and persist acoustic features");
  c_ingest->add_option("--manifest", manifest_path, "Corpus manifest JSON")->required();

  CLI::App* c_stats = app.add_subcommand("stats", "Compute per-speaker statistics");
  c_stats->add_option("--manifest", manifest_path, "Corpus manifest JSON")->required();

  CLI::App* c_tvae = app.add_subcommand("train-vae", "Train the CycleVAE spectral model");
  c_tvae->add_option("--manifest", manifest_path, "Corpus manifest JSON")->required();
  c_tvae->add_option("--resume", resume, "Checkpoint to resume from");

  CLI::App* c_tvoc = app.add_subcommand("train-vocoder", "Train the GAN vocoder");
  c_tvoc->add_option("--manifest", manifest_path, "Corpus manifest JSON")->required();
  c_tvoc->add_option("--vae-checkpoint", vae_ckpt, "Frozen CycleVAE checkpoint")->required();

  CLI::App* c_conv = app.add_subcommand("convert", "Convert one utterance between speakers");
  c_conv->add_option("--input", input, "Source WAV")->required();
  c_conv->add_option("--source", source_id, "Source speaker id")->required();
  c_conv->add_option("--target", target_id, "Target speaker id")->required();
  c_conv->add_option("--vae-checkpoint", vae_ckpt, "CycleVAE checkpoint")->required();
  c_conv->add_option("--vocoder-checkpoint", voc_ckpt, "Vocoder checkpoint")->required();
  c_conv->add_option("--output", output, "Output WAV path")->required();

  CLI::App* c_eval = app.add_subcommand("evaluate", "Objective metrics over aligned pairs");
  c_eval->add_option("--pairs", pairs_path, "JSON list of {converted, reference} paths")
      ->required();
  c_eval->add_option("--output", output, "Metrics CSV path");
  c_eval->add_option("--f0-min", eval_f0_min, "Evaluation F0 search floor (Hz)");
  c_eval->add_option("--f0-max", eval_f0_max, "Evaluation F0 search ceiling (Hz)");
  c_eval->add_option("--trim-db", eval_trim_db, "Silence trim threshold (dB)");

  CLI::App* c_inspect = app.add_subcommand("inspect-checkpoint", "Describe a checkpoint file");
  c_inspect->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_ingest->parsed()) {
      auto manifest = pipeline::load_manifest(manifest_path);
      auto cfg = load_config(g);
      auto result = pipeline::ingest(manifest, cfg, g.out_dir);
      json j = {{"ok", result.n_ok}, {"failed", result.n_failed},
                {"store", pipeline::feature_store_dir(g.out_dir)}};
      std::cout << j.dump() << "\n";
    } else if (c_stats->parsed()) {
      auto manifest = pipeline::load_manifest(manifest_path);
      auto all = pipeline::compute_all_stats(g.out_dir, manifest);
      json j = json::array();
      for (const auto& s : all)
        j.push_back({{"id", s.id},
                     {"logf0_mean", s.logf0.mean},
                     {"logf0_std", s.logf0.std},
                     {"voiced_frames", s.voiced_frames}});
      std::cout << j.dump() << "\n";
    } else if (c_tvae->parsed()) {
      auto manifest = pipeline::load_manifest(manifest_path);
      auto cfg = load_config(g);
      auto result = pipeline::train_vae(manifest, cfg, g.out_dir, g.seed, resume);
      json j = {{"checkpoint", result.final_checkpoint},
                {"epochs", result.epochs_run},
                {"steps", result.steps_run}};
      std::cout << j.dump() << "\n";
    } else if (c_tvoc->parsed()) {
      auto manifest = pipeline::load_manifest(manifest_path);
      auto cfg = load_config(g);
      auto result = pipeline::train_vocoder(manifest, cfg, g.out_dir, g.seed, vae_ckpt);
      json j = {{"checkpoint", result.final_checkpoint}, {"steps", result.steps_run}};
      std::cout << j.dump() << "\n";
    } else if (c_conv->parsed()) {
      auto result = pipeline::convert_utterance(input, source_id, target_id, vae_ckpt, voc_ckpt,
                                                output, g.seed);
      json j = {{"output", result.out_wav},
                {"frames", result.frames},
                {"duration_sec", result.duration_sec}};
      std::cout << j.dump() << "\n";
    } else if (c_eval->parsed()) {
      std::ifstream in(pairs_path);
      if (!in) throw std::runtime_error("evaluate: cannot open " + pairs_path);
      json pj;
      in >> pj;
      std::vector<pipeline::EvalPair> pairs;
      for (const auto& p : pj)
        pairs.push_back({p.at("converted").get<std::string>(),
                         p.at("reference").get<std::string>()});
      auto cfg = load_config(g);
      dsp::AnalysisConfig analysis = cfg.analysis;
      analysis.f0_min = eval_f0_min;
      analysis.f0_max = eval_f0_max;
      auto result = pipeline::evaluate_pairs(pairs, analysis, eval_trim_db, output);
      json j = {{"pairs", result.pairs.size()},
                {"mean_mcd_db", result.mean.mcd_db},
                {"mean_logf0_rmse", result.mean.logf0_rmse},
                {"mean_uv_error", result.mean.uv_error}};
      std::cout << j.dump() << "\n";
    } else if (c_inspect->parsed()) {
      std::cout << pipeline::describe_checkpoint(ckpt_path);
    }
  } catch (const std::exception& e) {
    json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
