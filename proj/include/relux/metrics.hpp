#pragma once

#include <functional>
#include <span>
#include <vector>

#include "relux/geometry.hpp"
#include "relux/image.hpp"

namespace relux::metrics {

inline constexpr double kPsnrCap = 99.0;

/// Binary per-pixel evaluation mask.
struct EvalMask {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> on;

    static EvalMask full(int width, int height);
    /// Foreground where the first channel exceeds `threshold`.
    static EvalMask from_image(const Image& image, float threshold = 0.5f);
    bool at(int x, int y) const { return on[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t count() const;
};

/// Per-pixel displacement (pixels) on the grid of frame k: frame k at p matches frame k+1 at p + flow(p).
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // dx, dy interleaved

    static FlowField constant(int width, int height, double dx, double dy);
    double dx(int x, int y) const { return data[2 * (static_cast<std::size_t>(y) * width + x)]; }
    double dy(int x, int y) const { return data[2 * (static_cast<std::size_t>(y) * width + x) + 1]; }
};

/// 10 log10(peak^2 / MSE) over masked pixels and all channels; capped at kPsnrCap.
double psnr(const Image& a, const Image& b, const EvalMask* mask = nullptr, double peak = 1.0);

/// Windowed SSIM, 11x11 Gaussian (sigma 1.5), C1 = (0.01 peak)^2, C2 = (0.03 peak)^2, channel-averaged.
/// Averages over window centers where the whole window fits and the center is inside the mask.
double ssim(const Image& a, const Image& b, const EvalMask* mask = nullptr, double peak = 1.0);

/// Samples `next` at p + flow(p) bilinearly. `valid` marks samples that stayed inside the image.
Image warp_by_flow(const Image& next, const FlowField& flow, std::vector<unsigned char>& valid);

/// Mean over consecutive frames of psnr(frame_k, warp(frame_{k+1}, flow_k)); out-of-bounds samples excluded.
double t_psnr(std::span<const Image> video, std::span<const FlowField> flows, const EvalMask* mask = nullptr,
              double peak = 1.0);

/// Exhaustive block matching (SAD), for building test flows. Each block gets one integer displacement.
FlowField block_matching_flow(const Image& frame, const Image& next, int block = 8, int radius = 4);

using RelightFn = std::function<Image(const LightingCondition&)>;

struct LinearityReport {
    double combination_residual = 0.0;  // |R(A+B) - R(A) - R(B)| / |R(A+B)|
    double scaling_residual = 0.0;      // |R(aA) - a R(A)| / |R(aA)|
    double alpha = 1.0;
    /// Left to right: R(A+B), R(A)+R(B), R(aA), a R(A).
    Image side_by_side;
};

/// A + B is the union of both light lists; aA scales every intensity.
LinearityReport linearity_report(const RelightFn& relight, const LightingCondition& a, const LightingCondition& b,
                                 double alpha);

/// Horizontal concatenation of same-height images.
Image hconcat(std::span<const Image> images);

}  // namespace relux::metrics
