#include "relux/toy/augment.hpp"

#include <algorithm>
#include <cmath>

#include "relux/error.hpp"

namespace relux::toy {

AugmentConfig AugmentConfig::full_scale() {
    AugmentConfig c;
    c.min_frames = 9;
    c.max_frames = 37;
    c.token_budget = 5000;
    c.grid_height = 30;
    c.grid_width = 52;
    c.min_side = 4;
    return c;
}

AugmentConfig AugmentConfig::toy() { return AugmentConfig{}; }

int AugmentationPlan::source_frames() const {
    return static_cast<int>(std::lround((frames - 1) * retime)) + 1;
}

AugmentationPlan sample_augmentation(std::mt19937_64& rng, const AugmentConfig& config) {
    if (config.min_frames < 1 || config.max_frames < config.min_frames) throw InvalidArgument("invalid frame range");
    if (!(config.min_aspect > 0.0) || config.max_aspect < config.min_aspect) throw InvalidArgument("invalid aspect range");
    if (config.min_side < 1 || config.min_side > std::min(config.grid_height, config.grid_width))
        throw InvalidArgument("minimum crop side does not fit the grid");
    if (!(config.min_retime > 0.0) || config.max_retime < config.min_retime) throw InvalidArgument("invalid retime range");
    if (static_cast<long long>(config.min_frames) * config.min_side * config.min_side > config.token_budget)
        throw InvalidArgument("token budget cannot hold the smallest crop at the shortest length");

    AugmentationPlan plan;
    plan.token_budget = config.token_budget;
    std::uniform_real_distribution<double> log_aspect(std::log(config.min_aspect), std::log(config.max_aspect));
    const double aspect = std::exp(log_aspect(rng));

    // Longest clip that still fits the smallest crop.
    const int max_frames =
        std::min(config.max_frames, config.token_budget / (config.min_side * config.min_side));
    std::uniform_int_distribution<int> frame_dist(config.min_frames, max_frames);
    plan.frames = frame_dist(rng);

    // Largest crop of the drawn aspect inside both the grid and the remaining budget.
    const double area = std::min<double>(config.grid_height * config.grid_width,
                                         static_cast<double>(config.token_budget / plan.frames));
    int h = static_cast<int>(std::floor(std::sqrt(area / aspect)));
    h = std::clamp(h, config.min_side, config.grid_height);
    int w = static_cast<int>(std::floor(h * aspect));
    w = std::clamp(w, config.min_side, config.grid_width);
    while (static_cast<long long>(h) * w * plan.frames > config.token_budget) {
        if (w >= h && w > config.min_side) --w;
        else if (h > config.min_side) --h;
        else --w;
    }
    // Grid clamping can push the realized ratio out of range; shrink the long side back.
    while (static_cast<double>(w) / h > config.max_aspect && w > 1) --w;
    while (static_cast<double>(w) / h < config.min_aspect && h > 1) --h;
    plan.crop_height = h;
    plan.crop_width = w;
    plan.aspect = static_cast<double>(w) / h;

    std::uniform_int_distribution<int> y_dist(0, config.grid_height - h);
    std::uniform_int_distribution<int> x_dist(0, config.grid_width - w);
    plan.crop_y = y_dist(rng);
    plan.crop_x = x_dist(rng);

    std::uniform_real_distribution<double> retime(config.min_retime, config.max_retime);
    plan.retime = retime(rng);
    return plan;
}

std::vector<int> retime_indices(int source_frames, double factor) {
    if (!(factor > 0.0)) throw InvalidArgument("retime factor must be positive");
    std::vector<int> out;
    for (int i = 0;; ++i) {
        const long idx = std::lround(i * factor);
        if (idx >= source_frames) break;
        out.push_back(static_cast<int>(idx));
    }
    return out;
}

}  // namespace relux::toy
