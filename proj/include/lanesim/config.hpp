#pragma once

#include <filesystem>
#include <string_view>

#include "lanesim/engine.hpp"

namespace lanesim {

/// Sets one `key=value` parameter, e.g. `idm.s0=2.5` or `mode=fast`.
/// Throws ValidationError for unknown keys or malformed values.
void apply_parameter(SimConfig& cfg, std::string_view key, std::string_view value);

/// Reads a parameter file (one `key=value` per line, `#` comments) on top
/// of `base` and validates the result.
SimConfig load_config(const std::filesystem::path& path, SimConfig base = {});

/// Writes every parameter in the format load_config reads.
void save_config(const SimConfig& cfg, const std::filesystem::path& path);

}  // namespace lanesim
