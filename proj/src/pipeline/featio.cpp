#include "vc/pipeline/featio.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vc::pipeline {

namespace {

void put_u32(std::ostream& s, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  s.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& s) {
  unsigned char b[4];
  s.read(reinterpret_cast<char*>(b), 4);
  if (!s) throw std::runtime_error("features: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& s, double v) {
  static_assert(sizeof(double) == 8);
  s.write(reinterpret_cast<const char*>(&v), 8);
}

double get_f64(std::istream& s) {
  double v;
  s.read(reinterpret_cast<char*>(&v), 8);
  if (!s) throw std::runtime_error("features: truncated file");
  return v;
}

}  // namespace

void write_features(const std::string& path, const FeatureFile& f) {
  f.seq.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("features: cannot write " + path);
  out.write("VCFT", 4);
  put_u32(out, kFeatureVersion);
  put_u32(out, static_cast<std::uint32_t>(f.seq.frames()));
  put_u32(out, static_cast<std::uint32_t>(f.seq.mcep_dim));
  put_u32(out, static_cast<std::uint32_t>(f.seq.ap_dim));
  put_u32(out, static_cast<std::uint32_t>(f.seq.sample_rate));
  put_f64(out, f.seq.frame_shift_ms);
  put_u32(out, f.trim_begin);
  put_u32(out, f.source_frames);
  for (std::size_t t = 0; t < f.seq.frames(); ++t) {
    for (double v : f.seq.mcep_frame(t)) put_f64(out, v);
    put_f64(out, f.seq.log_f0[t]);
    put_f64(out, static_cast<double>(f.seq.uv[t]));
    for (double v : f.seq.ap_frame(t)) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("features: write failed for " + path);
}

FeatureFile read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("features: cannot open " + path);
  char magic[5] = {0};
  in.read(magic, 4);
  if (!in || std::strncmp(magic, "VCFT", 4) != 0)
    throw std::runtime_error("features: bad magic in " + path);
  std::uint32_t version = get_u32(in);
  if (version != kFeatureVersion)
    throw std::runtime_error("features: unsupported version in " + path);

  FeatureFile f;
  std::uint32_t frames = get_u32(in);
  f.seq.mcep_dim = get_u32(in);
  f.seq.ap_dim = get_u32(in);
  f.seq.sample_rate = get_u32(in);
  f.seq.frame_shift_ms = get_f64(in);
  f.trim_begin = get_u32(in);
  f.source_frames = get_u32(in);

  f.seq.mcep.resize(frames * f.seq.mcep_dim);
  f.seq.log_f0.resize(frames);
  f.seq.uv.resize(frames);
  f.seq.coded_ap.resize(frames * f.seq.ap_dim);
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < f.seq.mcep_dim; ++d) f.seq.mcep[t * f.seq.mcep_dim + d] = get_f64(in);
    f.seq.log_f0[t] = get_f64(in);
    f.seq.uv[t] = get_f64(in) != 0.0 ? 1 : 0;
    for (std::size_t d = 0; d < f.seq.ap_dim; ++d) f.seq.coded_ap[t * f.seq.ap_dim + d] = get_f64(in);
  }
  f.seq.validate();
  return f;
}

}  // namespace vc::pipeline
