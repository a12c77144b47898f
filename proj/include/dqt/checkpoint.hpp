#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "dqt/tensor.hpp"

namespace dqt {

/// Everything needed to resume or evaluate a run. On disk: an 8-byte magic,
/// a format version, then length-prefixed strings and raw little-endian
/// 64-bit values for every named tensor of both parameter sets (values plus
/// AdamW moments when present).
struct Checkpoint {
  ParamSet online;
  ParamSet target;
  std::int64_t episode = 0;
  double learning_rate = 0.0;
  std::string rng_state;  // textual mt19937_64 state
  std::string config_json;

  static std::string encode_rng(const std::mt19937_64& rng);
  static std::mt19937_64 decode_rng(const std::string& state);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dqt
