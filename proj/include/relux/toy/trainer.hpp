#pragma once

// Training, sampling and evaluation for the toy relighter.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "relux/bipack.hpp"
#include "relux/toy/augment.hpp"
#include "relux/toy/model.hpp"
#include "relux/toy/scene.hpp"
#include "relux/window_blend.hpp"

namespace relux::toy {

/// Tensors for one tuple: conditioning input and the clean target video.
struct ToyExample {
    ToyInput input;
    Latent target;
};

Latent latent_from_frames(const bipack::FrameStream& stream, const std::vector<int>& frames, int y0, int x0,
                          int height, int width);
/// Latent frame f as an image.
Image latent_frame(const Latent& latent, int frame);

/// All frames at full resolution, or the frames and crop chosen by `plan`.
ToyExample make_example(const bipack::TrainingTuple& tuple, const ToyConfig& config,
                        const AugmentationPlan* plan = nullptr);

struct TrainOptions {
    int steps = 1500;
    int batch = 2;
    double lr = 4e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    /// Cosine decay from lr to lr * final_lr_fraction.
    double final_lr_fraction = 0.1;
    double t_min = 0.05;
    bool augment = true;
    AugmentConfig augmentation = AugmentConfig::toy();
    std::uint64_t seed = 0;
    /// Called after every step with (step, mean batch loss).
    std::function<void(int, double)> on_step;
};

struct TrainLog {
    std::vector<double> losses;
    double seconds = 0.0;
};

/// Adam on the squared noise-prediction error. Deterministic for a given seed.
/// Throws TrainingDivergence (holding the last finite parameters) on a non-finite loss or gradient.
TrainLog train(ToyModel& model, const std::vector<bipack::TrainingTuple>& dataset, const TrainOptions& options);

/// Euler integration of the rectified flow from pure noise at t = 1 over the grid t_k = 1 - k / n_steps.
Latent sample(const ToyModel& model, const ToyInput& input, int n_steps, std::uint64_t seed);

/// Sampling over overlapping temporal windows; window clean estimates are fused at every step.
Latent sample_long(const ToyModel& model, const ToyInput& input, const blend::WindowPlan& plan, int n_steps,
                   std::uint64_t seed);

struct EvalEntry {
    bool dynamic = false;
    int frames = 0;
    double psnr = 0.0;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    double mean_psnr = 0.0;
    double min_psnr = 0.0;
    double mean_static = 0.0;
    double mean_dynamic = 0.0;

    nlohmann::json to_json() const;
};

/// PSNR of sampled videos against the rendered targets, over all pixels and frames of each tuple.
EvalReport evaluate(const ToyModel& model, const std::vector<bipack::TrainingTuple>& held_out, int n_steps,
                    std::uint64_t seed);

/// Everything the CLI needs to reproduce a run.
struct ToyRunConfig {
    ToyConfig model;
    TrainOptions train;
    int train_samples = 4000;
    int eval_samples = 16;
    int eval_steps = 20;
    int scene_size = 16;
    ToyDatasetOptions data;

    /// Settings that reach the relighting target on one core within minutes.
    static ToyRunConfig defaults();
    static ToyRunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

}  // namespace relux::toy
