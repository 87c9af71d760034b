#pragma once

#include <string>

#include "gti/network.hpp"

namespace gti {

/// Flat binary model checkpoint:
///   magic "GTIM", u32 version, u32 head kind, u32 input width,
///   u32 layer count, then one layer record per layer
///   (u32 kind/in/out + geometry, f64 rate and constant, length-prefixed
///   f64 blobs for weights, bias, gamma, beta and running statistics).
/// All integers and floats little-endian, floats 64-bit.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace gti
