#pragma once

#include <string>
#include <vector>

#include "vc/dsp/features.hpp"
#include "vc/nn/tensor.hpp"

namespace vc::pipeline {

// Monotone alignment path over two mel-cepstral sequences (squared
// Euclidean over coefficients 1.., symmetric steps).
struct DtwPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double cost = 0.0;
};
DtwPath dtw_align(const dsp::AcousticFrameSequence& a, const dsp::AcousticFrameSequence& b);

struct EvalPair {
  std::string converted;
  std::string reference;
};

struct PairMetrics {
  std::string converted;
  std::string reference;
  double mcd_db = 0.0;
  double logf0_rmse = 0.0;  // over pairs voiced on both sides
  double uv_error = 0.0;    // voicing mismatch rate along the path
};

struct EvalResult {
  std::vector<PairMetrics> pairs;
  PairMetrics mean;
};

// Objective evaluation of converted vs reference utterances after DTW
// alignment; writes one CSV row per pair plus a corpus-mean row when
// out_csv is nonempty.
EvalResult evaluate_pairs(const std::vector<EvalPair>& pairs, const dsp::AnalysisConfig& analysis,
                          double trim_threshold_db, const std::string& out_csv);

}  // namespace vc::pipeline
