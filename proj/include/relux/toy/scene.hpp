#pragma once

// Desk-scale relighting data: a Lambertian sphere rendered under sampled lights.

#include <cstdint>
#include <random>
#include <vector>

#include "relux/bipack.hpp"
#include "relux/compositor.hpp"
#include "relux/geometry.hpp"
#include "relux/image.hpp"

namespace relux::toy {

/// Per-pixel normals and albedo. Pixels without geometry have a zero normal and render black.
struct LambertianScene {
    int width = 0;
    int height = 0;
    std::vector<Vec3> normals;
    std::vector<Rgb> albedo;

    /// Sphere inscribed in a size x size square on black, with a smooth albedo pattern.
    static LambertianScene sphere(int size = 16);
    bool covered(int x, int y) const;
    void validate() const;
};

/// albedo * sum_i max(0, n . d_i) l_i per pixel.
Image render_lambertian(const LambertianScene& scene, const LightingCondition& lighting);

/// One unit-intensity render per layout light: an exact OLAT stack of the scene.
olat::OlatStack render_olat_stack(const LambertianScene& scene, const SphereLayout& layout);

struct ToyLightingRanges {
    int min_lights = 1;
    int max_lights = 2;
    /// Per-light channel intensity is drawn from [min, max] / light count, keeping pixels at or below 1.
    double min_intensity = 0.3;
    double max_intensity = 1.0;
};

/// Random upper-hemisphere lighting over `frames` frames. Dynamic sequences blend intensities from one draw to
/// another; static ones repeat a single draw. Directions are shared by all frames.
bipack::LightingSequence sample_lighting(std::mt19937_64& rng, int frames, bool dynamic,
                                         const ToyLightingRanges& ranges = {});

/// Frames of `scene` under each keyframe, timestamped at the playback rate.
bipack::FrameStream render_sequence(const LambertianScene& scene, const bipack::LightingSequence& seq);

struct ToyDatasetOptions {
    int min_frames = 2;
    int max_frames = 6;
    ToyLightingRanges lighting;
};

/// Tuples alternate static (even index) and dynamic (odd index) target lighting. Input lighting is drawn
/// independently with the same dynamic flag.
std::vector<bipack::TrainingTuple> make_toy_dataset(const LambertianScene& scene, int n_samples,
                                                    std::uint64_t seed, const ToyDatasetOptions& options = {});

/// True when every frame of the target sequence carries the same lighting.
bool is_static(const bipack::LightingSequence& seq);

}  // namespace relux::toy
