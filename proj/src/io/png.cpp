#include "relux/io/png.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <string>

#include <zlib.h>

#include "relux/error.hpp"
#include "relux/geometry.hpp"

namespace relux::io {

namespace {

constexpr std::array<std::uint8_t, 8> kSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

Rgb8Image tonemap_to_srgb8(const Image& linear, double exposure) {
    Rgb8Image out{linear.width(), linear.height(), std::vector<std::uint8_t>(linear.data().size())};
    const auto src = linear.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = std::clamp(static_cast<double>(src[i]) * exposure, 0.0, 1.0);
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(linear_to_srgb(std::isnan(v) ? 0.0 : v) * 255.0));
    }
    return out;
}

std::vector<std::uint8_t> encode_png(const Rgb8Image& image) {
    std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(image.width));
    put_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // depth 8, truecolor, deflate, no filter method, no interlace
    put_chunk(out, "IHDR", ihdr);

    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        const auto* row = image.pixels.data() + stride * y;
        raw.insert(raw.end(), row, row + stride);
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(packed_size);
    if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("zlib compression failed");
    packed.resize(packed_size);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

Rgb8Image decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kSignature.size() || !std::equal(kSignature.begin(), kSignature.end(), bytes.begin()))
        throw FormatError("not a PNG file", 0);
    Rgb8Image img;
    std::vector<std::uint8_t> packed;
    std::size_t pos = kSignature.size();
    while (pos + 12 <= bytes.size()) {
        const std::uint32_t len = get_u32(bytes.data() + pos);
        const std::string type(bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + 8));
        if (pos + 12 + len > bytes.size()) throw FormatError("truncated PNG chunk", pos);
        const auto* data = bytes.data() + pos + 8;
        if (type == "IHDR") {
            img.width = static_cast<int>(get_u32(data));
            img.height = static_cast<int>(get_u32(data + 4));
            if (data[8] != 8 || data[9] != 2 || data[12] != 0) throw UnsupportedFormat("only 8-bit RGB PNG is supported");
        } else if (type == "IDAT") {
            packed.insert(packed.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    uLongf raw_size = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_size, packed.data(), static_cast<uLong>(packed.size())) != Z_OK ||
        raw_size != raw.size())
        throw FormatError("corrupt PNG image data", pos);
    img.pixels.resize(stride * img.height);
    for (int y = 0; y < img.height; ++y) {
        if (raw[(stride + 1) * y] != 0) throw UnsupportedFormat("filtered PNG rows are not supported");
        std::memcpy(img.pixels.data() + stride * y, raw.data() + (stride + 1) * y + 1, stride);
    }
    return img;
}

}  // namespace relux::io
