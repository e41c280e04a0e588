#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relux {

/// Linear RGB float image, interleaved, row 0 at the top.
class Image {
public:
    static constexpr int kChannels = 3;

    Image() = default;
    Image(int width, int height, float fill = 0.0f);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Image& o) const { return width_ == o.width_ && height_ == o.height_; }

    float& at(int x, int y, int c) { return data_[index(x, y, c)]; }
    float at(int x, int y, int c) const { return data_[index(x, y, c)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    /// Sample at continuous pixel coordinates (pixel centers at integers), edge-clamped.
    float bilinear(double x, double y, int c) const;

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

/// Zoom about the image center followed by a translation, in pixels.
struct Similarity {
    double dx = 0.0;
    double dy = 0.0;
    double zoom = 1.0;

    bool is_identity() const { return dx == 0.0 && dy == 0.0 && zoom == 1.0; }
};

/// Resamples `src` so that content at source position p lands at center + zoom*(p - center) + (dx, dy).
/// Bilinear, edge-clamped. Throws InvalidArgument for zoom <= 0.
Image warp_similarity(const Image& src, const Similarity& motion);

/// Box-filter downscale so that the longer side is at most `max_side`. Returns a copy when already small enough.
Image downscale_to(const Image& src, int max_side);

}  // namespace relux
