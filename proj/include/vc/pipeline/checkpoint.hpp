#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vc/nn/store.hpp"

namespace vc::pipeline {

// Binary checkpoint, magic "VCCK", little-endian. Round-trips parameter
// values, Adam moments, auxiliary buffers, and the RNG state bit-exactly;
// loading rejects magic/version/kind mismatches and truncated files without
// leaving partial state behind.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kKindVae = 1;
inline constexpr std::uint32_t kKindVocoder = 2;

struct CheckpointData {
  std::uint32_t kind = 0;
  std::string config_json;
  // named parameter stores ("model", or "gen"/"disc") with their Adam step
  std::vector<std::pair<std::string, nn::ParameterStore>> stores;
  std::vector<std::uint64_t> adam_steps;
  // non-trainable named arrays (conditioning stats, speaker stats)
  std::vector<std::pair<std::string, nn::Tensor>> buffers;
  std::array<std::uint64_t, 4> rng_state{};
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;

  const nn::ParameterStore& store(const std::string& name) const;
  const nn::Tensor& buffer(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);

// expected_kind 0 accepts any kind.
CheckpointData load_checkpoint(const std::string& path, std::uint32_t expected_kind);

// One line per fact: kind, step counters, config, array names and shapes.
std::string describe_checkpoint(const std::string& path);

}  // namespace vc::pipeline
