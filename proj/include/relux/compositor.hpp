#pragma once

// Image-based relighting from an OLAT reflectance field.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relux/bipack.hpp"
#include "relux/geometry.hpp"
#include "relux/image.hpp"

namespace relux::olat {

/// Equirectangular linear HDR environment, width = 2 * height.
class HdriImage {
public:
    HdriImage() = default;
    /// Throws InvalidArgument for a wrong aspect ratio or negative samples.
    explicit HdriImage(Image image);

    const Image& image() const { return image_; }
    int width() const { return image_.width(); }
    int height() const { return image_.height(); }

    /// Sum of pixel radiance times pixel solid angle.
    Rgb total_flux() const;

private:
    Image image_;
};

/// Per-light basis images in layout order; `scale` converts unit light intensity to image units.
struct OlatStack {
    SphereLayout layout;
    std::vector<Image> basis;
    double scale = 1.0;

    int width() const { return basis.empty() ? 0 : basis.front().width(); }
    int height() const { return basis.empty() ? 0 : basis.front().height(); }
    std::size_t size() const { return basis.size(); }

    void validate() const;
};

/// Exact nearest-direction lookup over a fixed layout, bucketed on a lat-long grid.
/// Agrees with SphereLayout::nearest, including its lowest-index tie break.
class NearestDirectionIndex {
public:
    explicit NearestDirectionIndex(const SphereLayout& layout, int grid_height = 32);
    std::size_t nearest(const Direction& d) const;

private:
    const SphereLayout* layout_;
    int grid_w_;
    int grid_h_;
    std::vector<std::vector<std::uint32_t>> candidates_;
};

enum class LowerHemisphere {
    Assign,  // below-horizon pixels go to their nearest stage light
    Drop,    // below-horizon pixels are discarded
};

/// Bins every HDRI pixel (after rotating the environment about +y) onto its nearest layout light.
/// The result lists every layout light in layout order.
LightingCondition hdri_to_lights(const HdriImage& hdri, const SphereLayout& layout, double rotation_deg,
                                 LowerHemisphere lower = LowerHemisphere::Assign);

/// Maps each source onto a stack light whose direction lies within `tolerance_deg`, summing sources that share one.
/// Throws InvalidArgument when a source has no light that close. Pass infinity to snap unconditionally.
std::vector<Rgb> resolve_weights(const OlatStack& stack, const LightingCondition& lighting,
                                 double tolerance_deg = 1.0);

/// out = scale * sum_i weights[i] * basis[i], summed over lights with a fixed pairwise tree per pixel.
Image composite_weights(const OlatStack& stack, std::span<const Rgb> weights);

Image composite(const OlatStack& stack, const LightingCondition& lighting);

/// Motion between consecutive frames; frame k composes steps[0..k-1].
struct MotionSpec {
    std::vector<Similarity> steps;

    static MotionSpec constant(int n_frames, const Similarity& step);
    /// Total motion of frame k relative to the source image.
    Similarity cumulative(int frame) const;
};

/// Repeats `image` over time under accumulated translation and zoom. Frame 0 is the input.
bipack::FrameStream pseudo_video(const Image& image, int n_frames, const MotionSpec& motion,
                                 bipack::Rational rate = {60, 1});

struct DatasetRecord {
    std::size_t input_hdri = 0;
    double input_rotation = 0.0;
    std::size_t target_hdri = 0;
    double target_rotation = 0.0;
    Similarity motion_step;
};

struct MotionRanges {
    double max_translation = 1.0;  // pixels per frame, each axis
    double max_zoom_rate = 0.02;   // |zoom - 1| per frame
};

struct OlatDataset {
    std::vector<bipack::TrainingTuple> tuples;
    std::vector<DatasetRecord> records;
};

/// One tuple per condition: two independently drawn (HDRI, rotation) lightings of the same pseudo-video motion.
OlatDataset build_olat_dataset(const OlatStack& stack, std::span<const HdriImage> hdris, int n_conditions,
                               int n_frames, std::uint64_t seed, const MotionRanges& ranges = {});

}  // namespace relux::olat
