#pragma once

#include <string>

#include "slnl/model.hpp"

namespace slnl {

/// Checkpoint file: magic "CKPT", u32 version = 1, u32 config-text length,
/// the flat key-value config snapshot, u32 record count, then per record a
/// u32 name length, the name, and one tensor record ("TNSR"). Buffers are
/// included, so a reloaded model evaluates identically.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace slnl
