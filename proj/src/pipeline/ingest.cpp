#include "vc/pipeline/ingest.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vc/dsp/wav.hpp"
#include "vc/pipeline/featio.hpp"

namespace vc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string feature_store_dir(const std::string& out_dir) {
  return (fs::path(out_dir) / "features").string();
}

IngestResult ingest(const CorpusManifest& manifest, const PipelineConfig& cfg,
                    const std::string& out_dir) {
  manifest.validate();
  const fs::path store(feature_store_dir(out_dir));
  fs::create_directories(store);

  IngestResult result;
  for (const auto& spk : manifest.speakers) {
    fs::create_directories(store / spk.id);
    dsp::AnalysisConfig analysis = cfg.analysis;
    analysis.sample_rate = manifest.sample_rate;
    analysis.f0_min = spk.f0_min;
    analysis.f0_max = spk.f0_max;

    auto process = [&](const std::string& wav_path, bool validation) {
      IngestItem item;
      item.speaker = spk.id;
      item.validation = validation;
      item.source = wav_path;
      std::string stem = fs::path(wav_path).stem().string();
      item.feature_path = (fs::path(spk.id) / (stem + ".vcft")).string();
      try {
        dsp::Waveform w = dsp::wav_read(wav_path);
        dsp::AcousticFrameSequence seq = dsp::analyze_utterance(w, analysis);
        auto [begin, end] = dsp::trim_range(seq, spk.power_threshold_db);
        FeatureFile f;
        f.seq = dsp::slice_frames(seq, begin, end);
        f.trim_begin = static_cast<std::uint32_t>(begin);
        f.source_frames = static_cast<std::uint32_t>(seq.frames());
        write_features((store / item.feature_path).string(), f);
        item.frames = f.seq.frames();
        item.ok = true;
        ++result.n_ok;
      } catch (const std::exception& e) {
        item.ok = false;
        item.error = e.what();
        ++result.n_failed;
      }
      result.items.push_back(std::move(item));
    };
    for (const auto& p : spk.train) process(p, false);
    for (const auto& p : spk.validation) process(p, true);
  }
  if (result.n_ok == 0) throw std::runtime_error("ingest: no utterance could be ingested");

  json idx;
  idx["items"] = json::array();
  for (const auto& it : result.items)
    idx["items"].push_back({{"speaker", it.speaker},
                            {"validation", it.validation},
                            {"source", it.source},
                            {"feature_path", it.feature_path},
                            {"frames", it.frames},
                            {"ok", it.ok},
                            {"error", it.error}});
  std::ofstream out(store / "index.json");
  out << idx.dump(2) << "\n";
  if (!out) throw std::runtime_error("ingest: cannot write index.json");
  return result;
}

IngestResult load_ingest_index(const std::string& out_dir) {
  const fs::path store(feature_store_dir(out_dir));
  std::ifstream in(store / "index.json");
  if (!in)
    throw std::runtime_error("ingest: missing feature index in " + store.string() +
                             " (run ingest first)");
  json idx;
  in >> idx;
  IngestResult result;
  for (const auto& j : idx.at("items")) {
    IngestItem it;
    it.speaker = j.at("speaker").get<std::string>();
    it.validation = j.at("validation").get<bool>();
    it.source = j.at("source").get<std::string>();
    it.feature_path = j.at("feature_path").get<std::string>();
    it.frames = j.at("frames").get<std::size_t>();
    it.ok = j.at("ok").get<bool>();
    it.error = j.at("error").get<std::string>();
    (it.ok ? result.n_ok : result.n_failed)++;
    result.items.push_back(std::move(it));
  }
  return result;
}

}  // namespace vc::pipeline
