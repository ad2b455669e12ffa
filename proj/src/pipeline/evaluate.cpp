#include "vc/pipeline/evaluate.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "vc/dsp/wav.hpp"
#include "vc/pipeline/train.hpp"

namespace vc::pipeline {

DtwPath dtw_align(const dsp::AcousticFrameSequence& a, const dsp::AcousticFrameSequence& b) {
  if (a.mcep_dim != b.mcep_dim) throw std::invalid_argument("dtw: dimension mismatch");
  const std::size_t ta = a.frames(), tb = b.frames();
  if (ta == 0 || tb == 0) throw std::invalid_argument("dtw: empty sequence");

  auto cost = [&](std::size_t i, std::size_t j) {
    auto fa = a.mcep_frame(i);
    auto fb = b.mcep_frame(j);
    double s = 0.0;
    for (std::size_t d = 1; d < a.mcep_dim; ++d) {
      double diff = fa[d] - fb[d];
      s += diff * diff;
    }
    return s;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(ta * tb, inf);
  std::vector<std::uint8_t> from(ta * tb, 0);  // 0 diag, 1 up(i-1), 2 left(j-1)
  auto at = [&](std::size_t i, std::size_t j) -> double& { return dp[i * tb + j]; };

  at(0, 0) = cost(0, 0);
  for (std::size_t i = 0; i < ta; ++i) {
    for (std::size_t j = 0; j < tb; ++j) {
      if (i == 0 && j == 0) continue;
      double best = inf;
      std::uint8_t dir = 0;
      if (i > 0 && j > 0 && at(i - 1, j - 1) < best) {
        best = at(i - 1, j - 1);
        dir = 0;
      }
      if (i > 0 && at(i - 1, j) < best) {
        best = at(i - 1, j);
        dir = 1;
      }
      if (j > 0 && at(i, j - 1) < best) {
        best = at(i, j - 1);
        dir = 2;
      }
      at(i, j) = best + cost(i, j);
      from[i * tb + j] = dir;
    }
  }

  DtwPath path;
  path.cost = at(ta - 1, tb - 1);
  std::size_t i = ta - 1, j = tb - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    switch (from[i * tb + j]) {
      case 0:
        --i;
        --j;
        break;
      case 1:
        --i;
        break;
      default:
        --j;
        break;
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

EvalResult evaluate_pairs(const std::vector<EvalPair>& pairs, const dsp::AnalysisConfig& analysis,
                          double trim_threshold_db, const std::string& out_csv) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: empty pairing");
  dsp::AnalysisConfig tolerant = analysis;
  tolerant.allow_unvoiced = true;  // metrics stay defined on unvoiced audio
  EvalResult result;
  for (const auto& p : pairs) {
    dsp::AcousticFrameSequence ca =
        dsp::trim_silence(dsp::analyze_utterance(dsp::wav_read(p.converted), tolerant),
                          trim_threshold_db);
    dsp::AcousticFrameSequence cb =
        dsp::trim_silence(dsp::analyze_utterance(dsp::wav_read(p.reference), tolerant),
                          trim_threshold_db);
    DtwPath path = dtw_align(ca, cb);

    double mcd_acc = 0.0, f0_acc = 0.0, uv_acc = 0.0;
    std::size_t f0_n = 0;
    for (auto [i, j] : path.pairs) {
      mcd_acc += dsp::mcd(ca.mcep_frame(i), cb.mcep_frame(j));
      bool va = ca.uv[i] != 0, vb = cb.uv[j] != 0;
      if (va != vb) uv_acc += 1.0;
      if (va && vb) {
        double d = ca.log_f0[i] - cb.log_f0[j];
        f0_acc += d * d;
        ++f0_n;
      }
    }
    PairMetrics m;
    m.converted = p.converted;
    m.reference = p.reference;
    m.mcd_db = mcd_acc / static_cast<double>(path.pairs.size());
    m.logf0_rmse = f0_n > 0 ? std::sqrt(f0_acc / static_cast<double>(f0_n)) : 0.0;
    m.uv_error = uv_acc / static_cast<double>(path.pairs.size());
    result.pairs.push_back(std::move(m));
  }

  for (const auto& m : result.pairs) {
    result.mean.mcd_db += m.mcd_db / static_cast<double>(result.pairs.size());
    result.mean.logf0_rmse += m.logf0_rmse / static_cast<double>(result.pairs.size());
    result.mean.uv_error += m.uv_error / static_cast<double>(result.pairs.size());
  }

  if (!out_csv.empty()) {
    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("evaluate: cannot write " + out_csv);
    f << "pair,converted,reference,mcd_db,logf0_rmse,uv_error\n";
    for (std::size_t i = 0; i < result.pairs.size(); ++i) {
      const auto& m = result.pairs[i];
      f << i << "," << m.converted << "," << m.reference << "," << format_double(m.mcd_db) << ","
        << format_double(m.logf0_rmse) << "," << format_double(m.uv_error) << "\n";
    }
    f << "mean,,," << format_double(result.mean.mcd_db) << ","
      << format_double(result.mean.logf0_rmse) << "," << format_double(result.mean.uv_error)
      << "\n";
  }
  return result;
}

}  // namespace vc::pipeline
