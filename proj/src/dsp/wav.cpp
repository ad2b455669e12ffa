#include "vc/dsp/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vc::dsp {

namespace {

template <typename T>
T read_le(std::istream& s) {
  unsigned char buf[sizeof(T)];
  s.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!s) throw std::runtime_error("wav: truncated file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

template <typename T>
void write_le(std::ostream& s, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  s.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

}  // namespace

Waveform wav_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("wav: cannot open " + path);

  char tag[5] = {0};
  f.read(tag, 4);
  if (!f || std::strncmp(tag, "RIFF", 4) != 0) throw std::runtime_error("wav: not a RIFF file: " + path);
  read_le<std::uint32_t>(f);  // riff size
  f.read(tag, 4);
  if (!f || std::strncmp(tag, "WAVE", 4) != 0) throw std::runtime_error("wav: not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  Waveform out;

  while (f.read(tag, 4)) {
    std::uint32_t chunk = read_le<std::uint32_t>(f);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(f);
      channels = read_le<std::uint16_t>(f);
      rate = read_le<std::uint32_t>(f);
      read_le<std::uint32_t>(f);  // byte rate
      read_le<std::uint16_t>(f);  // block align
      bits = read_le<std::uint16_t>(f);
      if (chunk > 16) f.seekg(chunk - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav: data chunk before fmt: " + path);
      if (channels != 1) throw std::runtime_error("wav: only mono input is supported: " + path);
      if (format == 1 && bits == 16) {
        std::size_t n = chunk / 2;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          auto v = static_cast<std::int16_t>(read_le<std::uint16_t>(f));
          out.samples[i] = static_cast<double>(v) / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        std::size_t n = chunk / 4;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::uint32_t u = read_le<std::uint32_t>(f);
          float fv;
          std::memcpy(&fv, &u, 4);
          out.samples[i] = static_cast<double>(fv);
        }
      } else {
        throw std::runtime_error("wav: unsupported encoding (want PCM-16 or float-32): " + path);
      }
      out.sample_rate = rate;
      for (double s : out.samples)
        if (!std::isfinite(s)) throw std::runtime_error("wav: non-finite sample in " + path);
      return out;
    } else {
      f.seekg(chunk + (chunk & 1), std::ios::cur);  // chunks are word-aligned
    }
  }
  throw std::runtime_error("wav: no data chunk in " + path);
}

void wav_write(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("wav: cannot write " + path);
  std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  f.write("RIFF", 4);
  write_le<std::uint32_t>(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_le<std::uint32_t>(f, 16);
  write_le<std::uint16_t>(f, 1);  // PCM
  write_le<std::uint16_t>(f, 1);  // mono
  write_le<std::uint32_t>(f, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(f, static_cast<std::uint32_t>(w.sample_rate * 2));
  write_le<std::uint16_t>(f, 2);
  write_le<std::uint16_t>(f, 16);
  f.write("data", 4);
  write_le<std::uint32_t>(f, data_bytes);
  for (double s : w.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    write_le<std::uint16_t>(f, static_cast<std::uint16_t>(v));
  }
  if (!f) throw std::runtime_error("wav: write failed for " + path);
}

}  // namespace vc::dsp
