#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "satdepth/correspondence.hpp"

namespace satdepth::cli {

/// 8-bit grayscale PNG, row-major pixels.
std::string encode_png_gray8(const std::vector<std::uint8_t>& pixels, int height, int width);

/// Linear stretch mapping the lo/hi percentiles of the finite values to
/// 0..255. Non-finite pixels become 0.
std::vector<std::uint8_t> percentile_stretch(const Image& img, double lo_pct = 2.0, double hi_pct = 98.0);

}  // namespace satdepth::cli
