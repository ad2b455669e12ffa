#include "vc/pipeline/stats.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vc/pipeline/featio.hpp"

namespace vc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

SpeakerStats compute_stats(const std::string& out_dir, const IngestResult& index,
                           const std::string& speaker_id) {
  const fs::path store(feature_store_dir(out_dir));
  SpeakerStats s;
  s.id = speaker_id;
  std::vector<double> voiced;
  double power_sum = 0.0, power_max = -1e300;
  std::size_t power_n = 0;
  bool found = false;
  for (const auto& item : index.items) {
    if (item.speaker != speaker_id || item.validation || !item.ok) continue;
    found = true;
    FeatureFile f = read_features((store / item.feature_path).string());
    std::vector<double> db = dsp::relative_power_db(f.seq);
    for (std::size_t t = 0; t < f.seq.frames(); ++t) {
      if (f.seq.uv[t]) voiced.push_back(f.seq.log_f0[t]);
      power_sum += db[t];
      power_max = std::max(power_max, db[t]);
      ++power_n;
    }
  }
  if (!found)
    throw std::runtime_error("stats: no ingested training utterances for speaker '" +
                             speaker_id + "'");
  if (voiced.empty())
    throw std::runtime_error("stats: no voiced frames for speaker '" + speaker_id + "'");
  s.logf0 = dsp::log_f0_stats(voiced);
  s.voiced_frames = voiced.size();
  s.power_db_mean = power_sum / static_cast<double>(power_n);
  s.power_db_max = power_max;
  return s;
}

std::vector<SpeakerStats> compute_all_stats(const std::string& out_dir,
                                            const CorpusManifest& manifest) {
  IngestResult index = load_ingest_index(out_dir);
  std::vector<SpeakerStats> all;
  for (const auto& spk : manifest.speakers) all.push_back(compute_stats(out_dir, index, spk.id));

  json j;
  j["speakers"] = json::array();
  for (const auto& s : all)
    j["speakers"].push_back({{"id", s.id},
                             {"logf0_mean", s.logf0.mean},
                             {"logf0_std", s.logf0.std},
                             {"voiced_frames", s.voiced_frames},
                             {"power_db_mean", s.power_db_mean},
                             {"power_db_max", s.power_db_max}});
  std::ofstream out(fs::path(out_dir) / "stats.json");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("stats: cannot write stats.json");
  return all;
}

std::vector<SpeakerStats> load_stats(const std::string& out_dir) {
  std::ifstream in(fs::path(out_dir) / "stats.json");
  if (!in)
    throw std::runtime_error("stats: missing stats.json in " + out_dir + " (run stats first)");
  json j;
  in >> j;
  std::vector<SpeakerStats> all;
  for (const auto& js : j.at("speakers")) {
    SpeakerStats s;
    s.id = js.at("id").get<std::string>();
    s.logf0.mean = js.at("logf0_mean").get<double>();
    s.logf0.std = js.at("logf0_std").get<double>();
    s.voiced_frames = js.at("voiced_frames").get<std::size_t>();
    s.power_db_mean = js.at("power_db_mean").get<double>();
    s.power_db_max = js.at("power_db_max").get<double>();
    all.push_back(std::move(s));
  }
  return all;
}

}  // namespace vc::pipeline
