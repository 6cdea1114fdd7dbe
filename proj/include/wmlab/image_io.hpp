#pragma once

#include <string>

#include "wmlab/core.hpp"

namespace wmlab {

// Decodes an 8-bit PNG or binary PPM/PGM file into [0,1] doubles. Grayscale
// sources give 1 channel, color sources 3; 16-bit PNGs are reduced to 8,
// alpha is dropped.
Image read_image_file(const std::string& path);

// Writes 8-bit PNG (grayscale or RGB), rounding each value to the nearest
// 8-bit level. Lossy with respect to the internal doubles.
void write_png(const Image& img, const std::string& path);

// Binary PPM (3 channels) or PGM (1 channel), maxval 255, same rounding.
void write_pnm(const Image& img, const std::string& path);

}  // namespace wmlab
