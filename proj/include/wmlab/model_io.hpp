#pragma once

#include <cstdint>
#include <string>

#include "wmlab/codec.hpp"

namespace wmlab {

// Model file layout (all little-endian):
//   magic "WIRM" (4 bytes)
//   format version, u32 (currently 1)
//   CodecConfig: n, channels, side, filters as i32; strength as f32;
//                seed as two u32 (low word, high word)
//   weight tensors as f32 in tensor_views() order
//   CRC32 (IEEE) of all preceding bytes, u32
void save_model(const CodecParams& params, const std::string& path);

// Throws CorruptModel on bad magic, unknown version, truncation or CRC
// mismatch. load(save(p)) is bitwise-identical to p.
CodecParams load_model(const std::string& path);

// IEEE CRC-32 (as used by the model file and the report manifest).
uint32_t crc32(const void* data, size_t len);

inline constexpr uint32_t kModelVersion = 1;

}  // namespace wmlab
