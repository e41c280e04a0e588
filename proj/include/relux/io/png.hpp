#pragma once

#include <cstdint>
#include <vector>

#include "relux/image.hpp"

namespace relux::io {

/// 8-bit RGB pixels, row-major, top row first.
struct Rgb8Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

/// linear_to_srgb(clamp(v * exposure, 0, 1)), quantized to 8 bits.
Rgb8Image tonemap_to_srgb8(const Image& linear, double exposure);

/// Deterministic PNG encoding (truecolor, 8-bit, no filtering, fixed zlib level).
std::vector<std::uint8_t> encode_png(const Rgb8Image& image);
/// Decodes PNGs produced by encode_png. Other variants raise UnsupportedFormat.
Rgb8Image decode_png(const std::vector<std::uint8_t>& bytes);

}  // namespace relux::io
