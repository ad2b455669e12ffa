#pragma once

#include <string>
#include <vector>

#include "vc/pipeline/config.hpp"
#include "vc/pipeline/manifest.hpp"

namespace vc::pipeline {

// One entry of the on-disk feature store index.
struct IngestItem {
  std::string speaker;
  bool validation = false;
  std::string source;        // original wav path
  std::string feature_path;  // written .vcft, relative to the store root
  std::size_t frames = 0;
  bool ok = false;
  std::string error;
};

struct IngestResult {
  std::vector<IngestItem> items;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

// Extracts, trims, and persists features for every manifest utterance under
// <out_dir>/features, writing index.json alongside. Unreadable or silent
// files are recorded and skipped; zero successes is an error.
IngestResult ingest(const CorpusManifest& manifest, const PipelineConfig& cfg,
                    const std::string& out_dir);

// Reads a previously written feature store index.
IngestResult load_ingest_index(const std::string& out_dir);

std::string feature_store_dir(const std::string& out_dir);

}  // namespace vc::pipeline
