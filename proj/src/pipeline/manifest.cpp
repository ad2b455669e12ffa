#include "vc/pipeline/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace vc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const SpeakerProfile& CorpusManifest::speaker_by_id(const std::string& id) const {
  for (const auto& s : speakers)
    if (s.id == id) return s;
  throw std::runtime_error("manifest: unknown speaker id '" + id + "'");
}

void CorpusManifest::validate() const {
  if (speakers.size() < 2) throw std::runtime_error("manifest: need at least 2 speakers");
  std::set<std::string> ids;
  for (const auto& s : speakers) {
    if (!ids.insert(s.id).second)
      throw std::runtime_error("manifest: duplicate speaker id '" + s.id + "'");
    if (!(s.f0_min > 0.0 && s.f0_min < s.f0_max))
      throw std::runtime_error("manifest: bad F0 range for speaker '" + s.id + "'");
    std::set<std::string> train(s.train.begin(), s.train.end());
    for (const auto& v : s.validation)
      if (train.count(v))
        throw std::runtime_error("manifest: train/validation overlap for speaker '" + s.id +
                                 "': " + v);
  }
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest: parse error in " + path + ": " + e.what());
  }

  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  CorpusManifest m;
  m.sample_rate = j.value("sample_rate", 24000);
  if (!j.contains("speakers") || !j["speakers"].is_array())
    throw std::runtime_error("manifest: missing speakers array in " + path);
  std::size_t code = 0;
  for (const auto& js : j["speakers"]) {
    SpeakerProfile s;
    s.id = js.at("id").get<std::string>();
    s.code = code++;
    s.f0_min = js.value("f0_min", 70.0);
    s.f0_max = js.value("f0_max", 400.0);
    s.power_threshold_db = js.value("power_threshold_db", -40.0);
    for (const auto& p : js.value("train", json::array())) s.train.push_back(resolve(p));
    for (const auto& p : js.value("validation", json::array()))
      s.validation.push_back(resolve(p));
    m.speakers.push_back(std::move(s));
  }
  m.validate();
  return m;
}

}  // namespace vc::pipeline
