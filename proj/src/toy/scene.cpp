#include "relux/toy/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relux/error.hpp"

namespace relux::toy {

LambertianScene LambertianScene::sphere(int size) {
    if (size < 2) throw InvalidArgument("scene size must be at least 2");
    LambertianScene s;
    s.width = size;
    s.height = size;
    const auto n = static_cast<std::size_t>(size) * size;
    s.normals.assign(n, Vec3{});
    s.albedo.assign(n, Rgb{});
    const double r = 0.5 * size;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double nx = (x + 0.5 - r) / r;
            const double ny = -(y + 0.5 - r) / r;
            const double rr = nx * nx + ny * ny;
            if (rr >= 1.0) continue;
            const auto i = static_cast<std::size_t>(y) * size + x;
            s.normals[i] = {nx, ny, std::sqrt(1.0 - rr)};
            const double band = 0.5 + 0.5 * std::sin(3.0 * std::numbers::pi * ny);
            s.albedo[i] = {0.55 + 0.35 * band, 0.75 - 0.25 * band, 0.4 + 0.2 * nx};
        }
    }
    return s;
}

bool LambertianScene::covered(int x, int y) const {
    const Vec3& n = normals[static_cast<std::size_t>(y) * width + x];
    return n.x != 0.0 || n.y != 0.0 || n.z != 0.0;
}

void LambertianScene::validate() const {
    const auto n = static_cast<std::size_t>(width) * height;
    if (width < 1 || height < 1 || normals.size() != n || albedo.size() != n)
        throw InvalidArgument("scene buffers do not match its resolution");
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& v = normals[i];
        const double len = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
        if (len != 0.0 && std::abs(len - 1.0) > 1e-9) throw InvalidArgument("scene normal is not unit length");
        const Rgb& a = albedo[i];
        if (!(a.r >= 0 && a.r <= 1 && a.g >= 0 && a.g <= 1 && a.b >= 0 && a.b <= 1))
            throw InvalidArgument("scene albedo outside [0, 1]");
    }
}

Image render_lambertian(const LambertianScene& scene, const LightingCondition& lighting) {
    Image out(scene.width, scene.height);
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            const auto i = static_cast<std::size_t>(y) * scene.width + x;
            const Vec3& n = scene.normals[i];
            Rgb sum;
            for (const auto& l : lighting.lights) {
                const double c = std::max(0.0, dot(n, l.direction.vec()));
                sum += l.intensity * c;
            }
            const Rgb px = sum * scene.albedo[i];
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(px[c]);
        }
    }
    return out;
}

olat::OlatStack render_olat_stack(const LambertianScene& scene, const SphereLayout& layout) {
    olat::OlatStack stack;
    stack.layout = layout;
    stack.basis.reserve(layout.size());
    for (const auto& d : layout.directions) {
        LightingCondition one;
        one.lights.push_back({d, Rgb{1.0, 1.0, 1.0}});
        stack.basis.push_back(render_lambertian(scene, one));
    }
    return stack;
}

namespace {

Direction sample_upper(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double y = u(rng);
    const double phi = 2.0 * std::numbers::pi * u(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    return Direction::normalized({r * std::sin(phi), y, r * std::cos(phi)});
}

Rgb sample_intensity(std::mt19937_64& rng, const ToyLightingRanges& ranges, int count) {
    std::uniform_real_distribution<double> u(ranges.min_intensity, ranges.max_intensity);
    const double s = 1.0 / count;
    const double r = u(rng), g = u(rng), b = u(rng);
    return Rgb{r, g, b} * s;
}

}  // namespace

bipack::LightingSequence sample_lighting(std::mt19937_64& rng, int frames, bool dynamic,
                                         const ToyLightingRanges& ranges) {
    if (frames < 1) throw InvalidArgument("need at least one frame");
    std::uniform_int_distribution<int> count_dist(ranges.min_lights, ranges.max_lights);
    const int count = count_dist(rng);
    std::vector<Direction> dirs;
    std::vector<Rgb> from;
    std::vector<Rgb> to;
    for (int i = 0; i < count; ++i) {
        dirs.push_back(sample_upper(rng));
        from.push_back(sample_intensity(rng, ranges, count));
    }
    for (int i = 0; i < count; ++i) to.push_back(dynamic ? sample_intensity(rng, ranges, count) : from[static_cast<std::size_t>(i)]);

    bipack::LightingSequence seq;
    seq.keyframe_rate = 60.0;
    seq.playback_rate = 60.0;
    for (int f = 0; f < frames; ++f) {
        const double a = frames > 1 ? static_cast<double>(f) / (frames - 1) : 0.0;
        LightingCondition c;
        for (std::size_t i = 0; i < dirs.size(); ++i) c.lights.push_back({dirs[i], from[i] + (to[i] - from[i]) * a});
        seq.keyframes.push_back(std::move(c));
    }
    return seq;
}

bipack::FrameStream render_sequence(const LambertianScene& scene, const bipack::LightingSequence& seq) {
    bipack::FrameStream s;
    s.rate = {60, 1};
    for (std::size_t i = 0; i < seq.keyframes.size(); ++i) {
        bipack::Frame f;
        f.image = render_lambertian(scene, seq.keyframes[i]);
        f.time = {static_cast<std::int64_t>(i), 60};
        f.lighting = seq.keyframes[i];
        s.frames.push_back(std::move(f));
    }
    return s;
}

std::vector<bipack::TrainingTuple> make_toy_dataset(const LambertianScene& scene, int n_samples,
                                                    std::uint64_t seed, const ToyDatasetOptions& options) {
    scene.validate();
    if (options.min_frames < 1 || options.max_frames < options.min_frames)
        throw InvalidArgument("invalid frame range");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> frame_dist(options.min_frames, options.max_frames);
    std::vector<bipack::TrainingTuple> out;
    out.reserve(static_cast<std::size_t>(std::max(0, n_samples)));
    for (int i = 0; i < n_samples; ++i) {
        const bool dynamic = (i % 2) == 1;
        const int frames = frame_dist(rng);
        bipack::TrainingTuple t;
        const auto input_light = sample_lighting(rng, frames, dynamic, options.lighting);
        t.target_lighting = sample_lighting(rng, frames, dynamic, options.lighting);
        t.input_video = render_sequence(scene, input_light);
        t.target_video = render_sequence(scene, t.target_lighting);
        out.push_back(std::move(t));
    }
    return out;
}

bool is_static(const bipack::LightingSequence& seq) {
    for (const auto& k : seq.keyframes) {
        for (std::size_t i = 0; i < k.size(); ++i)
            if (!(k.lights[i].intensity == seq.keyframes.front().lights[i].intensity)) return false;
    }
    return true;
}

}  // namespace relux::toy
