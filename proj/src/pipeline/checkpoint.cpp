#include "vc/pipeline/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vc::pipeline {

namespace {

void put_u32(std::ostream& s, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  s.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& s, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  s.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& s) {
  unsigned char b[4];
  s.read(reinterpret_cast<char*>(b), 4);
  if (!s) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& s) {
  unsigned char b[8];
  s.read(reinterpret_cast<char*>(b), 8);
  if (!s) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& s, const std::string& str) {
  put_u64(s, str.size());
  s.write(str.data(), static_cast<std::streamsize>(str.size()));
}

std::string get_string(std::istream& s) {
  std::uint64_t n = get_u64(s);
  if (n > (1ull << 32)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string str(n, '\0');
  s.read(str.data(), static_cast<std::streamsize>(n));
  if (!s) throw std::runtime_error("checkpoint: truncated file");
  return str;
}

void put_doubles(std::ostream& s, const std::vector<double>& v) {
  s.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::istream& s, std::vector<double>& v) {
  s.read(reinterpret_cast<char*>(v.data()),
         static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!s) throw std::runtime_error("checkpoint: truncated file");
}

void put_tensor(std::ostream& s, const nn::Tensor& t) {
  put_u32(s, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t d : t.shape()) put_u64(s, d);
  put_doubles(s, t.values());
}

nn::Tensor get_tensor(std::istream& s) {
  std::uint32_t nd = get_u32(s);
  if (nd > 8) throw std::runtime_error("checkpoint: corrupt tensor rank");
  std::vector<std::size_t> shape(nd);
  std::size_t total = 1;
  for (auto& d : shape) {
    d = static_cast<std::size_t>(get_u64(s));
    total *= d;
  }
  if (total > (1ull << 30)) throw std::runtime_error("checkpoint: corrupt tensor size");
  nn::Tensor t(shape);
  get_doubles(s, t.values());
  return t;
}

}  // namespace

const nn::ParameterStore& CheckpointData::store(const std::string& name) const {
  for (const auto& [n, s] : stores)
    if (n == name) return s;
  throw std::runtime_error("checkpoint: missing store '" + name + "'");
}

const nn::Tensor& CheckpointData::buffer(const std::string& name) const {
  for (const auto& [n, t] : buffers)
    if (n == name) return t;
  throw std::runtime_error("checkpoint: missing buffer '" + name + "'");
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  if (data.stores.size() != data.adam_steps.size())
    throw std::invalid_argument("checkpoint: one adam step counter per store");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write("VCCK", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, data.kind);
  put_string(out, data.config_json);

  put_u64(out, data.stores.size());
  for (std::size_t i = 0; i < data.stores.size(); ++i) {
    const auto& [name, store] = data.stores[i];
    put_string(out, name);
    put_u64(out, data.adam_steps[i]);
    put_u64(out, store.entries().size());
    for (const auto& [pname, e] : store.entries()) {
      put_string(out, pname);
      put_tensor(out, e.value);
      put_tensor(out, e.m);
      put_tensor(out, e.v);
    }
  }
  put_u64(out, data.buffers.size());
  for (const auto& [name, t] : data.buffers) {
    put_string(out, name);
    put_tensor(out, t);
  }
  for (std::uint64_t w : data.rng_state) put_u64(out, w);
  put_u64(out, data.step);
  put_u64(out, data.epoch);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

CheckpointData load_checkpoint(const std::string& path, std::uint32_t expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[5] = {0};
  in.read(magic, 4);
  if (!in || std::strncmp(magic, "VCCK", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);

  CheckpointData data;
  data.kind = get_u32(in);
  if (expected_kind != 0 && data.kind != expected_kind)
    throw std::runtime_error("checkpoint: kind mismatch in " + path + " (expected " +
                             std::to_string(expected_kind) + ", found " +
                             std::to_string(data.kind) + ")");
  data.config_json = get_string(in);

  std::uint64_t n_stores = get_u64(in);
  for (std::uint64_t i = 0; i < n_stores; ++i) {
    std::string name = get_string(in);
    std::uint64_t adam = get_u64(in);
    std::uint64_t n_entries = get_u64(in);
    nn::ParameterStore store;
    for (std::uint64_t k = 0; k < n_entries; ++k) {
      std::string pname = get_string(in);
      nn::Tensor value = get_tensor(in);
      nn::Tensor m = get_tensor(in);
      nn::Tensor v = get_tensor(in);
      store.create(pname, std::move(value));
      auto& e = store.entry(pname);
      if (!m.same_shape(e.value) || !v.same_shape(e.value))
        throw std::runtime_error("checkpoint: moment shape mismatch for " + pname);
      e.m = std::move(m);
      e.v = std::move(v);
    }
    data.stores.emplace_back(std::move(name), std::move(store));
    data.adam_steps.push_back(adam);
  }
  std::uint64_t n_buffers = get_u64(in);
  for (std::uint64_t i = 0; i < n_buffers; ++i) {
    std::string name = get_string(in);
    data.buffers.emplace_back(std::move(name), get_tensor(in));
  }
  for (auto& w : data.rng_state) w = get_u64(in);
  data.step = get_u64(in);
  data.epoch = get_u64(in);
  return data;
}

std::string describe_checkpoint(const std::string& path) {
  CheckpointData d = load_checkpoint(path, 0);
  std::ostringstream os;
  os << "kind: " << (d.kind == kKindVae ? "vae" : d.kind == kKindVocoder ? "vocoder" : "?")
     << "\nstep: " << d.step << "\nepoch: " << d.epoch << "\n";
  for (std::size_t i = 0; i < d.stores.size(); ++i) {
    const auto& [name, store] = d.stores[i];
    os << "store " << name << " (adam step " << d.adam_steps[i] << ", "
       << store.total_size() << " values):\n";
    for (const auto& [pname, e] : store.entries())
      os << "  " << pname << " " << e.value.shape_str() << "\n";
  }
  for (const auto& [name, t] : d.buffers) os << "buffer " << name << " " << t.shape_str() << "\n";
  os << "config: " << d.config_json << "\n";
  return os.str();
}

}  // namespace vc::pipeline
