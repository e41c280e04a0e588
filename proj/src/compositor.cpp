#include "relux/compositor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "relux/error.hpp"
#include "relux/parallel.hpp"

namespace relux::olat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kTilePixels = 1024;
constexpr std::size_t kLeafLights = 8;

}  // namespace

HdriImage::HdriImage(Image image) : image_(std::move(image)) {
    if (image_.height() <= 0 || image_.width() != 2 * image_.height()) {
        throw InvalidArgument("HDRI must be equirectangular with width = 2 * height, got " +
                              std::to_string(image_.width()) + "x" + std::to_string(image_.height()));
    }
    for (float s : image_.data()) {
        if (!(s >= 0.0f) || !std::isfinite(s)) throw InvalidArgument("HDRI samples must be finite and nonnegative");
    }
}

Rgb HdriImage::total_flux() const {
    Rgb sum;
    for (int y = 0; y < height(); ++y) {
        const double w = solid_angle_weight(y, width(), height());
        Rgb row;
        for (int x = 0; x < width(); ++x) row += Rgb{image_.at(x, y, 0), image_.at(x, y, 1), image_.at(x, y, 2)};
        sum += row * w;
    }
    return sum;
}

void OlatStack::validate() const {
    if (basis.size() != layout.size()) {
        throw InvalidArgument("stack has " + std::to_string(basis.size()) + " images for " +
                              std::to_string(layout.size()) + " lights");
    }
    for (const auto& img : basis) {
        if (!img.same_shape(basis.front())) throw InvalidArgument("stack images differ in size");
        for (float s : img.data()) {
            if (!(s >= 0.0f)) throw InvalidArgument("stack images must be nonnegative");
        }
    }
    if (!(scale >= 0.0)) throw InvalidArgument("stack scale must be nonnegative");
}

NearestDirectionIndex::NearestDirectionIndex(const SphereLayout& layout, int grid_height)
    : layout_(&layout), grid_w_(2 * grid_height), grid_h_(grid_height) {
    if (layout.empty()) throw InvalidArgument("empty sphere layout");
    candidates_.resize(static_cast<std::size_t>(grid_w_) * grid_h_);

    constexpr int kEdgeSamples = 6;
    for (int gy = 0; gy < grid_h_; ++gy) {
        for (int gx = 0; gx < grid_w_; ++gx) {
            const double u0 = static_cast<double>(gx) / grid_w_;
            const double v0 = static_cast<double>(gy) / grid_h_;
            const double du = 1.0 / grid_w_;
            const double dv = 1.0 / grid_h_;
            const Direction center = latlong_to_dir(u0 + 0.5 * du, v0 + 0.5 * dv);

            // Angular radius of the cell, from a dense sampling of its boundary.
            double radius = 0.0;
            for (int s = 0; s <= kEdgeSamples; ++s) {
                const double f = static_cast<double>(s) / kEdgeSamples;
                for (const auto& [u, v] : std::array<std::pair<double, double>, 4>{
                         {{u0 + f * du, v0}, {u0 + f * du, v0 + dv}, {u0, v0 + f * dv}, {u0 + du, v0 + f * dv}}}) {
                    radius = std::max(radius, angle_between(center, latlong_to_dir(u, std::min(v, 1.0))));
                }
            }
            // Boundary sampling can miss the farthest point by a sliver; pad generously.
            radius = radius * 1.25 + 1e-6;

            const std::size_t best = layout.nearest(center);
            const double reach = angle_between(center, layout.directions[best]) + 2.0 * radius;
            auto& list = candidates_[static_cast<std::size_t>(gy) * grid_w_ + gx];
            for (std::size_t i = 0; i < layout.size(); ++i) {
                if (angle_between(center, layout.directions[i]) <= reach) list.push_back(static_cast<std::uint32_t>(i));
            }
        }
    }
}

std::size_t NearestDirectionIndex::nearest(const Direction& d) const {
    const LatLong uv = dir_to_latlong(d);
    const int gx = std::clamp(static_cast<int>(uv.u * grid_w_), 0, grid_w_ - 1);
    const int gy = std::clamp(static_cast<int>(uv.v * grid_h_), 0, grid_h_ - 1);
    const auto& list = candidates_[static_cast<std::size_t>(gy) * grid_w_ + gx];
    std::size_t best = list.front();
    double best_dot = -2.0;
    for (std::uint32_t i : list) {
        const double c = dot(layout_->directions[i], d);
        if (c > best_dot) {
            best_dot = c;
            best = i;
        }
    }
    return best;
}

LightingCondition hdri_to_lights(const HdriImage& hdri, const SphereLayout& layout, double rotation_deg,
                                 LowerHemisphere lower) {
    if (layout.empty()) throw InvalidArgument("hdri_to_lights: empty layout");
    const NearestDirectionIndex index(layout);
    const int w = hdri.width();
    const int h = hdri.height();
    const Image& img = hdri.image();

    // Row partial sums are independent, then reduced in row order.
    std::vector<std::vector<Rgb>> rows(static_cast<std::size_t>(h));
    parallel_for(0, static_cast<std::size_t>(h), 4, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t y = lo; y < hi; ++y) {
            auto& acc = rows[y];
            acc.assign(layout.size(), Rgb{});
            const double weight = solid_angle_weight(y, w, h);
            const double v = (static_cast<double>(y) + 0.5) / h;
            for (int x = 0; x < w; ++x) {
                const Direction d = rotate_y(latlong_to_dir((x + 0.5) / w, v), rotation_deg);
                if (lower == LowerHemisphere::Drop && d.y() < 0.0) continue;
                const int yi = static_cast<int>(y);
                acc[index.nearest(d)] +=
                    Rgb{img.at(x, yi, 0), img.at(x, yi, 1), img.at(x, yi, 2)} * weight;
            }
        }
    });

    LightingCondition out;
    out.lights.resize(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) out.lights[i].direction = layout.directions[i];
    for (const auto& acc : rows) {
        for (std::size_t i = 0; i < layout.size(); ++i) out.lights[i].intensity += acc[i];
    }
    return out;
}

std::vector<Rgb> resolve_weights(const OlatStack& stack, const LightingCondition& lighting, double tolerance_deg) {
    lighting.validate();
    const auto& dirs = stack.layout.directions;
    std::vector<Rgb> weights(stack.size());

    bool aligned = lighting.size() == dirs.size();
    for (std::size_t i = 0; aligned && i < dirs.size(); ++i) aligned = lighting.lights[i].direction == dirs[i];
    if (aligned) {
        for (std::size_t i = 0; i < dirs.size(); ++i) weights[i] = lighting.lights[i].intensity;
        return weights;
    }

    const double tolerance = tolerance_deg * kPi / 180.0;
    for (std::size_t s = 0; s < lighting.size(); ++s) {
        const auto& light = lighting.lights[s];
        const std::size_t i = stack.layout.nearest(light.direction);
        if (angle_between(dirs[i], light.direction) > tolerance) {
            throw InvalidArgument("light " + std::to_string(s) + " matches no stack light within " +
                                  std::to_string(tolerance_deg) + " degrees");
        }
        weights[i] += light.intensity;
    }
    return weights;
}

namespace {

struct TileReducer {
    const OlatStack& stack;
    std::span<const std::array<float, 3>> weights;
    std::size_t offset = 0;  // float offset of the tile
    std::size_t length = 0;  // floats in the tile
    std::vector<std::vector<float>> scratch;

    void leaf(std::size_t lo, std::size_t hi, float* acc) const {
        std::fill(acc, acc + length, 0.0f);
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& w = weights[i];
            if (w[0] == 0.0f && w[1] == 0.0f && w[2] == 0.0f) continue;
            const float* src = stack.basis[i].data().data() + offset;
            for (std::size_t j = 0; j < length; j += 3) {
                acc[j] += w[0] * src[j];
                acc[j + 1] += w[1] * src[j + 1];
                acc[j + 2] += w[2] * src[j + 2];
            }
        }
    }

    void reduce(std::size_t lo, std::size_t hi, float* acc, std::size_t depth) {
        if (hi - lo <= kLeafLights) {
            leaf(lo, hi, acc);
            return;
        }
        const std::size_t mid = lo + (hi - lo) / 2;
        reduce(lo, mid, acc, depth + 1);
        if (scratch.size() <= depth) scratch.resize(depth + 1);
        scratch[depth].resize(length);
        // The recursion may grow scratch, so re-index rather than hold a reference.
        reduce(mid, hi, scratch[depth].data(), depth + 1);
        const float* tmp = scratch[depth].data();
        for (std::size_t j = 0; j < length; ++j) acc[j] += tmp[j];
    }
};

}  // namespace

Image composite_weights(const OlatStack& stack, std::span<const Rgb> weights) {
    if (weights.size() != stack.size()) throw InvalidArgument("weight count differs from stack size");
    Image out(stack.width(), stack.height());
    if (stack.size() == 0) return out;

    std::vector<std::array<float, 3>> w(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        w[i] = {static_cast<float>(weights[i].r * stack.scale), static_cast<float>(weights[i].g * stack.scale),
                static_cast<float>(weights[i].b * stack.scale)};
    }

    auto dst = out.data();
    const std::size_t pixels = out.pixel_count();
    parallel_for(0, pixels, kTilePixels, [&](std::size_t lo, std::size_t hi) {
        TileReducer reducer{stack, w, lo * 3, (hi - lo) * 3, {}};
        reducer.reduce(0, stack.size(), dst.data() + lo * 3, 0);
    });
    return out;
}

Image composite(const OlatStack& stack, const LightingCondition& lighting) {
    const auto weights = resolve_weights(stack, lighting);
    return composite_weights(stack, weights);
}

MotionSpec MotionSpec::constant(int n_frames, const Similarity& step) {
    MotionSpec spec;
    if (n_frames > 1) spec.steps.assign(static_cast<std::size_t>(n_frames - 1), step);
    return spec;
}

Similarity MotionSpec::cumulative(int frame) const {
    Similarity total;
    for (int k = 0; k < frame; ++k) {
        const Similarity& s = steps.at(static_cast<std::size_t>(k));
        if (!(s.zoom > 0.0)) throw InvalidArgument("zoom must be positive");
        // Later steps act on the already moved image.
        total = {s.zoom * total.dx + s.dx, s.zoom * total.dy + s.dy, s.zoom * total.zoom};
    }
    return total;
}

bipack::FrameStream pseudo_video(const Image& image, int n_frames, const MotionSpec& motion, bipack::Rational rate) {
    if (n_frames < 1) throw InvalidArgument("pseudo_video needs at least one frame");
    if (motion.steps.size() + 1 < static_cast<std::size_t>(n_frames))
        throw InvalidArgument("motion spec is shorter than the requested frame count");
    for (const auto& s : motion.steps) {
        if (!(s.zoom > 0.0)) throw InvalidArgument("zoom must be positive");
    }

    bipack::FrameStream stream;
    stream.rate = rate;
    stream.frames.resize(static_cast<std::size_t>(n_frames));
    parallel_for(0, stream.frames.size(), 1, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            auto& f = stream.frames[k];
            f.image = warp_similarity(image, motion.cumulative(static_cast<int>(k)));
            f.time = {static_cast<std::int64_t>(k) * rate.den, rate.num};
        }
    });
    return stream;
}

OlatDataset build_olat_dataset(const OlatStack& stack, std::span<const HdriImage> hdris, int n_conditions,
                               int n_frames, std::uint64_t seed, const MotionRanges& ranges) {
    if (hdris.empty()) throw InvalidArgument("build_olat_dataset: empty HDRI set");
    if (n_conditions < 0 || n_frames < 1) throw InvalidArgument("build_olat_dataset: bad counts");
    stack.validate();

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, hdris.size() - 1);
    std::uniform_real_distribution<double> rotation(0.0, 360.0);
    std::uniform_real_distribution<double> shift(-ranges.max_translation, ranges.max_translation);
    std::uniform_real_distribution<double> zoom(1.0 - ranges.max_zoom_rate, 1.0 + ranges.max_zoom_rate);

    OlatDataset out;
    for (int c = 0; c < n_conditions; ++c) {
        DatasetRecord rec;
        rec.input_hdri = pick(rng);
        rec.input_rotation = rotation(rng);
        rec.target_hdri = pick(rng);
        rec.target_rotation = rotation(rng);
        rec.motion_step.dx = shift(rng);
        rec.motion_step.dy = shift(rng);
        rec.motion_step.zoom = zoom(rng);

        const auto input_light = hdri_to_lights(hdris[rec.input_hdri], stack.layout, rec.input_rotation);
        const auto target_light = hdri_to_lights(hdris[rec.target_hdri], stack.layout, rec.target_rotation);
        const auto motion = MotionSpec::constant(n_frames, rec.motion_step);

        bipack::TrainingTuple tuple;
        tuple.input_video = pseudo_video(composite(stack, input_light), n_frames, motion);
        tuple.target_video = pseudo_video(composite(stack, target_light), n_frames, motion);
        tuple.target_lighting.keyframe_rate = tuple.target_video.rate.value();
        tuple.target_lighting.playback_rate = tuple.target_video.rate.value();
        for (auto& f : tuple.input_video.frames) f.lighting = input_light;
        for (auto& f : tuple.target_video.frames) {
            f.lighting = target_light;
            tuple.target_lighting.keyframes.push_back(target_light);
        }
        out.tuples.push_back(std::move(tuple));
        out.records.push_back(rec);
    }
    return out;
}

}  // namespace relux::olat
