#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dqt/trainer.hpp"

namespace dqt {

/// JSON document mirroring TrainConfig. Absent keys keep their defaults;
/// unknown keys and ill-typed values raise ConfigError.
TrainConfig parse_config(std::string_view json_text);
TrainConfig load_config(const std::filesystem::path& path);
/// Full document with every field spelled out, pretty-printed.
std::string dump_config(const TrainConfig& config);

}  // namespace dqt
