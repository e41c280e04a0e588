#include "relux/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "relux/error.hpp"

namespace relux::metrics {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

double to_psnr(double mse, double peak) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

void check_pair(const Image& a, const Image& b, const EvalMask* mask) {
    if (!a.same_shape(b)) throw InvalidArgument("images differ in size");
    if (mask && (mask->width != a.width() || mask->height != a.height()))
        throw InvalidArgument("mask size differs from image size");
}

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> taps{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double x = i - kSsimWindow / 2;
        taps[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        sum += taps[static_cast<std::size_t>(i)];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

// Valid-mode separable filter of a single-channel w x h plane. Output is (w - 10) x (h - 10).
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h) {
    static const auto taps = gaussian_taps();
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += taps[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * w + x + i];
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += taps[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

EvalMask EvalMask::full(int width, int height) {
    return {width, height, std::vector<unsigned char>(static_cast<std::size_t>(width) * height, 1)};
}

EvalMask EvalMask::from_image(const Image& image, float threshold) {
    EvalMask m{image.width(), image.height(), std::vector<unsigned char>(image.pixel_count(), 0)};
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            m.on[static_cast<std::size_t>(y) * image.width() + x] = image.at(x, y, 0) > threshold ? 1 : 0;
    return m;
}

std::size_t EvalMask::count() const { return static_cast<std::size_t>(std::count(on.begin(), on.end(), 1)); }

FlowField FlowField::constant(int width, int height, double dx, double dy) {
    FlowField f{width, height, std::vector<double>(2 * static_cast<std::size_t>(width) * height)};
    for (std::size_t i = 0; i < f.data.size(); i += 2) {
        f.data[i] = dx;
        f.data[i + 1] = dy;
    }
    return f;
}

namespace {

double psnr_selected(const Image& a, const Image& b, const EvalMask* mask, const std::vector<unsigned char>* valid,
                     double peak) {
    if (!(peak > 0.0)) throw InvalidArgument("peak must be positive");
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (mask && !mask->at(x, y)) continue;
            if (valid && !(*valid)[static_cast<std::size_t>(y) * a.width() + x]) continue;
            for (int c = 0; c < Image::kChannels; ++c) {
                const double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
                sum += d * d;
            }
            n += Image::kChannels;
        }
    }
    if (n == 0) throw InvalidArgument("no pixels selected for PSNR");
    return to_psnr(sum / static_cast<double>(n), peak);
}

}  // namespace

double psnr(const Image& a, const Image& b, const EvalMask* mask, double peak) {
    check_pair(a, b, mask);
    if (mask && mask->count() == 0) throw InvalidArgument("empty mask");
    return psnr_selected(a, b, mask, nullptr, peak);
}

double ssim(const Image& a, const Image& b, const EvalMask* mask, double peak) {
    check_pair(a, b, mask);
    if (a.width() < kSsimWindow || a.height() < kSsimWindow)
        throw InvalidArgument("image smaller than the 11x11 SSIM window");
    const int w = a.width();
    const int h = a.height();
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    std::vector<double> map(static_cast<std::size_t>(ow) * oh, 0.0);
    std::vector<double> pa(static_cast<std::size_t>(w) * h), pb(pa.size()), paa(pa.size()), pbb(pa.size()),
        pab(pa.size());
    for (int c = 0; c < Image::kChannels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const auto i = static_cast<std::size_t>(y) * w + x;
                const double u = a.at(x, y, c);
                const double v = b.at(x, y, c);
                pa[i] = u;
                pb[i] = v;
                paa[i] = u * u;
                pbb[i] = v * v;
                pab[i] = u * v;
            }
        }
        const auto ma = filter_valid(pa, w, h);
        const auto mb = filter_valid(pb, w, h);
        const auto saa = filter_valid(paa, w, h);
        const auto sbb = filter_valid(pbb, w, h);
        const auto sab = filter_valid(pab, w, h);
        for (std::size_t i = 0; i < map.size(); ++i) {
            const double va = saa[i] - ma[i] * ma[i];
            const double vb = sbb[i] - mb[i] * mb[i];
            const double cov = sab[i] - ma[i] * mb[i];
            map[i] += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
                      ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2)) / Image::kChannels;
        }
    }

    const int half = kSsimWindow / 2;
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            if (mask && !mask->at(x + half, y + half)) continue;
            sum += map[static_cast<std::size_t>(y) * ow + x];
            ++n;
        }
    }
    if (n == 0) throw InvalidArgument("no SSIM window centers inside the mask");
    return sum / static_cast<double>(n);
}

Image warp_by_flow(const Image& next, const FlowField& flow, std::vector<unsigned char>& valid) {
    if (flow.width != next.width() || flow.height != next.height())
        throw InvalidArgument("flow size differs from frame size");
    Image out(next.width(), next.height());
    valid.assign(next.pixel_count(), 0);
    const double max_x = next.width() - 1;
    const double max_y = next.height() - 1;
    for (int y = 0; y < next.height(); ++y) {
        for (int x = 0; x < next.width(); ++x) {
            const double sx = x + flow.dx(x, y);
            const double sy = y + flow.dy(x, y);
            if (!(sx >= -1e-9 && sx <= max_x + 1e-9 && sy >= -1e-9 && sy <= max_y + 1e-9)) continue;
            valid[static_cast<std::size_t>(y) * next.width() + x] = 1;
            for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = next.bilinear(sx, sy, c);
        }
    }
    return out;
}

double t_psnr(std::span<const Image> video, std::span<const FlowField> flows, const EvalMask* mask, double peak) {
    if (video.empty()) throw InvalidArgument("empty video");
    if (flows.size() + 1 != video.size())
        throw InvalidArgument("expected " + std::to_string(video.size() - 1) + " flow fields");
    if (flows.empty()) return kPsnrCap;
    double sum = 0.0;
    std::vector<unsigned char> valid;
    for (std::size_t k = 0; k < flows.size(); ++k) {
        check_pair(video[k], video[k + 1], mask);
        const Image warped = warp_by_flow(video[k + 1], flows[k], valid);
        sum += psnr_selected(video[k], warped, mask, &valid, peak);
    }
    return sum / static_cast<double>(flows.size());
}

FlowField block_matching_flow(const Image& frame, const Image& next, int block, int radius) {
    if (!frame.same_shape(next)) throw InvalidArgument("frames differ in size");
    if (block < 1 || radius < 0) throw InvalidArgument("bad block matching parameters");
    FlowField flow = FlowField::constant(frame.width(), frame.height(), 0.0, 0.0);
    for (int by = 0; by < frame.height(); by += block) {
        for (int bx = 0; bx < frame.width(); bx += block) {
            const int bw = std::min(block, frame.width() - bx);
            const int bh = std::min(block, frame.height() - by);
            double best = std::numeric_limits<double>::infinity();
            int best_dx = 0;
            int best_dy = 0;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (bx + dx < 0 || by + dy < 0 || bx + bw + dx > frame.width() || by + bh + dy > frame.height())
                        continue;
                    double sad = 0.0;
                    for (int y = 0; y < bh; ++y)
                        for (int x = 0; x < bw; ++x)
                            for (int c = 0; c < Image::kChannels; ++c)
                                sad += std::abs(static_cast<double>(frame.at(bx + x, by + y, c)) -
                                                next.at(bx + x + dx, by + y + dy, c));
                    // Prefer the smallest displacement among ties.
                    if (sad < best - 1e-12 ||
                        (std::abs(sad - best) <= 1e-12 && std::abs(dx) + std::abs(dy) < std::abs(best_dx) + std::abs(best_dy))) {
                        best = sad;
                        best_dx = dx;
                        best_dy = dy;
                    }
                }
            }
            for (int y = 0; y < bh; ++y) {
                for (int x = 0; x < bw; ++x) {
                    const auto i = 2 * (static_cast<std::size_t>(by + y) * frame.width() + bx + x);
                    flow.data[i] = best_dx;
                    flow.data[i + 1] = best_dy;
                }
            }
        }
    }
    return flow;
}

namespace {

double l2(std::span<const float> x) {
    double s = 0.0;
    for (float v : x) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

double l2_diff(std::span<const float> x, std::span<const float> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - y[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

LinearityReport linearity_report(const RelightFn& relight, const LightingCondition& a, const LightingCondition& b,
                                 double alpha) {
    const Image r_a = relight(a);
    const Image r_b = relight(b);
    const Image r_ab = relight(combine(a, b));
    const Image r_scaled = relight(a.scaled(alpha));
    if (!r_a.same_shape(r_b) || !r_a.same_shape(r_ab) || !r_a.same_shape(r_scaled))
        throw InvalidArgument("relight function returned images of different sizes");

    Image sum = r_a;
    Image scaled = r_a;
    for (std::size_t i = 0; i < sum.data().size(); ++i) {
        sum.data()[i] = static_cast<float>(static_cast<double>(r_a.data()[i]) + r_b.data()[i]);
        scaled.data()[i] = static_cast<float>(alpha * r_a.data()[i]);
    }

    const double n_ab = l2(r_ab.data());
    const double n_scaled = l2(r_scaled.data());
    if (!(n_ab > 0.0) || !(n_scaled > 0.0)) throw InvalidArgument("linearity reference image has zero norm");

    LinearityReport report;
    report.alpha = alpha;
    report.combination_residual = l2_diff(r_ab.data(), sum.data()) / n_ab;
    report.scaling_residual = l2_diff(r_scaled.data(), scaled.data()) / n_scaled;
    const std::array<Image, 4> panels{r_ab, sum, r_scaled, scaled};
    report.side_by_side = hconcat(panels);
    return report;
}

Image hconcat(std::span<const Image> images) {
    if (images.empty()) return {};
    int width = 0;
    for (const auto& img : images) {
        if (img.height() != images.front().height()) throw InvalidArgument("hconcat: heights differ");
        width += img.width();
    }
    Image out(width, images.front().height());
    int x0 = 0;
    for (const auto& img : images) {
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                for (int c = 0; c < Image::kChannels; ++c) out.at(x0 + x, y, c) = img.at(x, y, c);
        x0 += img.width();
    }
    return out;
}

}  // namespace relux::metrics
