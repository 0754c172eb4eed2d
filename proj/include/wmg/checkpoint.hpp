#pragma once

#include <filesystem>

#include "wmg/diffusion_imputer.hpp"

namespace wmg {

/// Writes `dir/manifest` (JSON) and `dir/weights.bin` (little-endian float32
/// tensors concatenated in manifest order). Creates dir if needed.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

/// VersionError on a format mismatch; ValidationError naming the offending
/// manifest field; IoError on missing or truncated files.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace wmg
