#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "afog/types.hpp"

namespace afog {

// Quantize [0,1] intensities to 8-bit with round-half-away rounding.
std::vector<std::uint8_t> quantize8(const std::vector<double>& values);

// 8-bit PNG, channels must be 1 (gray) or 3 (RGB). Fixed encoder settings so
// identical inputs give byte-identical files on one platform.
void write_png(const std::string& path, const std::uint8_t* data, int height, int width,
               int channels);

void write_png_image(const std::string& path, const Image& img);

// Decodes to [0,1] doubles; palette and low-bit-depth inputs are expanded,
// 16-bit is reduced, alpha is stripped. Result has 1 or 3 channels.
Image read_png_image(const std::string& path);

}  // namespace afog
