#include "relux/image.hpp"

#include <algorithm>
#include <cmath>

#include "relux/error.hpp"

namespace relux {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidArgument("negative image size");
    data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

float Image::bilinear(double x, double y, int c) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
    const double bottom = (1.0 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
    return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

Image warp_similarity(const Image& src, const Similarity& motion) {
    if (!(motion.zoom > 0.0)) throw InvalidArgument("zoom must be positive");
    if (motion.is_identity()) return src;

    Image out(src.width(), src.height());
    const double cx = 0.5 * (src.width() - 1);
    const double cy = 0.5 * (src.height() - 1);
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            const double sx = cx + (x - motion.dx - cx) / motion.zoom;
            const double sy = cy + (y - motion.dy - cy) / motion.zoom;
            for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = src.bilinear(sx, sy, c);
        }
    }
    return out;
}

Image downscale_to(const Image& src, int max_side) {
    if (max_side <= 0) throw InvalidArgument("max_side must be positive");
    const int longest = std::max(src.width(), src.height());
    if (longest <= max_side) return src;
    const int factor = (longest + max_side - 1) / max_side;
    const int w = std::max(1, src.width() / factor);
    const int h = std::max(1, src.height() / factor);
    Image out(w, h);
    const float norm = 1.0f / static_cast<float>(factor * factor);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                float sum = 0.0f;
                for (int j = 0; j < factor; ++j) {
                    for (int i = 0; i < factor; ++i) sum += src.at(x * factor + i, y * factor + j, c);
                }
                out.at(x, y, c) = sum * norm;
            }
        }
    }
    return out;
}

}  // namespace relux
