#include "relux/io/pfm.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "relux/error.hpp"

namespace relux::io {

static_assert(std::endian::native == std::endian::little, "PFM codec assumes a little-endian host");

std::vector<std::uint8_t> encode_pfm(const Image& image) {
    const std::string header =
        "PF\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n-1.0\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const std::size_t row_bytes = static_cast<std::size_t>(image.width()) * Image::kChannels * sizeof(float);
    out.resize(header.size() + row_bytes * image.height());
    auto* dst = out.data() + header.size();
    const auto src = image.data();
    for (int y = image.height() - 1; y >= 0; --y) {
        std::memcpy(dst, src.data() + static_cast<std::size_t>(y) * image.width() * Image::kChannels, row_bytes);
        dst += row_bytes;
    }
    return out;
}

namespace {

class HeaderReader {
public:
    explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }
    std::size_t token_start() const { return start_; }

    std::string token() {
        while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
        start_ = pos_;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
        if (start_ == pos_) throw FormatError("unexpected end of PFM header", pos_);
        return {bytes_.begin() + static_cast<std::ptrdiff_t>(start_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_)};
    }

    // Exactly one whitespace byte separates the header from the payload.
    void single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("missing header terminator", pos_);
        ++pos_;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
    std::size_t start_ = 0;
};

int parse_dimension(const std::string& s, std::size_t offset) {
    if (s.empty() || s.size() > 9) throw FormatError("bad PFM dimension '" + s + "'", offset);
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) throw FormatError("bad PFM dimension '" + s + "'", offset);
    }
    const int v = std::stoi(s);
    if (v <= 0) throw FormatError("PFM dimension must be positive", offset);
    return v;
}

}  // namespace

Image decode_pfm(const std::vector<std::uint8_t>& bytes) {
    HeaderReader r(bytes);
    const std::string magic = r.token();
    if (magic == "Pf") throw UnsupportedFormat("grayscale PFM is not supported");
    if (magic != "PF") throw FormatError("not a PFM file (magic '" + magic + "')", 0);

    const std::string w_text = r.token();
    const int w = parse_dimension(w_text, r.token_start());
    const std::string h_text = r.token();
    const int h = parse_dimension(h_text, r.token_start());
    const std::string scale_text = r.token();
    const std::size_t at = r.token_start();
    double scale = 0.0;
    try {
        std::size_t used = 0;
        scale = std::stod(scale_text, &used);
        if (used != scale_text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw FormatError("bad PFM scale '" + scale_text + "'", at);
    }
    if (scale == 0.0) throw FormatError("PFM scale must be nonzero", at);
    if (scale > 0.0) throw UnsupportedFormat("big-endian PFM is not supported");
    r.single_whitespace();

    const std::size_t row_bytes = static_cast<std::size_t>(w) * Image::kChannels * sizeof(float);
    const std::size_t need = row_bytes * static_cast<std::size_t>(h);
    if (bytes.size() - r.pos() < need) {
        throw UnsupportedFormat("truncated PFM payload: need " + std::to_string(need) + " bytes, have " +
                                std::to_string(bytes.size() - r.pos()));
    }
    Image img(w, h);
    auto dst = img.data();
    const auto* src = bytes.data() + r.pos();
    for (int y = h - 1; y >= 0; --y) {
        std::memcpy(dst.data() + static_cast<std::size_t>(y) * w * Image::kChannels, src, row_bytes);
        src += row_bytes;
    }
    return img;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

Image read_pfm(const std::string& path) { return decode_pfm(read_file(path)); }

void write_pfm(const std::string& path, const Image& image) { write_file(path, encode_pfm(image)); }

}  // namespace relux::io
