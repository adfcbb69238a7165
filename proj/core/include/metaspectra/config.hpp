#pragma once

#include <cstdint>
#include <string>

#include "metaspectra/domain.hpp"
#include "metaspectra/propagation.hpp"
#include "metaspectra/reconstruction.hpp"

namespace msp {

struct RunConfig {
  std::string preset = "default";  // "default" or "toy"; explicit "system" keys override it
  SystemConfig system;
  PsfOptions psf;
  GuidedOptions reconstruction;
  std::uint64_t seed = 0;
  bool noiseless = false;
};

// unknown keys and type errors raise ConfigError
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

std::string system_to_json(const SystemConfig& system);
SystemConfig system_from_json(const std::string& json_text);

std::string sha256_hex(const std::string& bytes);
// SHA-256 of the canonical (sorted-key, compact) JSON form
std::string config_hash(const RunConfig& config);

}  // namespace msp
