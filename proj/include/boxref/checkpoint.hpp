// Binary checkpoint format for trained models.
//
// Layout: 8-byte magic "BOXREFCK", u32 version, u64 header length, JSON header
// (model config plus a tensor directory with name/shape/byte offset), then all
// tensor data as raw little-endian f32. Round-trips are bit-exact. Loading
// validates magic, version, config compatibility, and every tensor shape.
#pragma once

#include <string>

#include "boxref/model.hpp"

namespace boxref {

void save_checkpoint(const std::string& path, Model<float>& model);

// Reconstructs the model (config comes from the header); `seed` only affects
// construction-time init, which is then fully overwritten.
Model<float> load_checkpoint(const std::string& path);

// Loads weights into an existing model; throws if configs are incompatible.
void load_checkpoint_into(const std::string& path, Model<float>& model);

}  // namespace boxref
