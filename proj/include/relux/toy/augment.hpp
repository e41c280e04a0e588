#pragma once

// Per-batch augmentation: aspect ratio, sequence length, crop and retiming under a token budget.

#include <random>
#include <vector>

namespace relux::toy {

struct AugmentConfig {
    double min_aspect = 0.5;  // width / height
    double max_aspect = 2.0;
    int min_frames = 2;
    int max_frames = 6;
    int token_budget = 256;
    /// Full image size in patches.
    int grid_height = 8;
    int grid_width = 8;
    /// Smallest crop side in patches.
    int min_side = 2;
    /// Retime factor range; 1 keeps every frame.
    double min_retime = 1.0;
    double max_retime = 2.0;

    /// Frames [9, 37], 5000 tokens, 480x832 at 16 pixels per token.
    static AugmentConfig full_scale();
    /// Frames [2, 6] on the 16x16 toy scene with 2x2 patches.
    static AugmentConfig toy();
};

struct AugmentationPlan {
    double aspect = 1.0;  // crop_width / crop_height as realized
    int frames = 1;
    int crop_y = 0;  // patches
    int crop_x = 0;
    int crop_height = 1;
    int crop_width = 1;
    double retime = 1.0;
    int token_budget = 0;

    int tokens() const { return frames * crop_height * crop_width; }
    /// Source frames needed so that retiming yields `frames` frames.
    int source_frames() const;
};

/// Throws InvalidArgument when even the smallest crop at the shortest length exceeds the budget.
AugmentationPlan sample_augmentation(std::mt19937_64& rng, const AugmentConfig& config);

/// Nearest-neighbour retiming: source indices round(i * factor) that fall inside [0, source_frames).
std::vector<int> retime_indices(int source_frames, double factor);

}  // namespace relux::toy
