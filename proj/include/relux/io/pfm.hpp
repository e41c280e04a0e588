#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relux/image.hpp"

namespace relux::io {

/// Encodes as "PF\n<w> <h>\n-1.0\n" followed by little-endian float32 RGB rows, bottom row first.
std::vector<std::uint8_t> encode_pfm(const Image& image);
/// Throws FormatError (with byte offset) for a malformed header and UnsupportedFormat for
/// grayscale, big-endian, or truncated files.
Image decode_pfm(const std::vector<std::uint8_t>& bytes);

Image read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Image& image);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace relux::io
