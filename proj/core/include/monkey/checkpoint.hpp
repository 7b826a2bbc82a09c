// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "monkey/model.hpp"

namespace monkey {

// Single-file model artifact: magic "MNKY", format version u16, an entry
// table of (name, dtype, shape, offset), raw little-endian payloads, and a
// trailing CRC32 of all preceding bytes. Carries every weight tensor, the
// vocabulary (words + embedding table) and the model config, so a run is
// reproducible from this one file.

inline constexpr char kCheckpointMagic[4] = {'M', 'N', 'K', 'Y'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Deterministic key-value rendering of a ModelConfig; the exact bytes are
/// stored in the checkpoint and must round-trip identically.
std::string model_config_to_text(const ModelConfig& cfg);

/// Strict inverse of model_config_to_text: every key required, unknown
/// keys rejected.
ModelConfig model_config_from_text(const std::string& text);

void save_checkpoint(const std::string& path, const Model& model);

/// Rebuilds the full model. Corrupt files raise distinct errors:
/// BadMagicError, VersionError, CrcError, TruncatedFileError.
Model load_checkpoint(const std::string& path);

}  // namespace monkey
