#include "relux/toy/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "relux/error.hpp"
#include "relux/metrics.hpp"

namespace relux::toy {

Latent latent_from_frames(const bipack::FrameStream& stream, const std::vector<int>& frames, int y0, int x0,
                          int height, int width) {
    Latent out = Latent::zeros(static_cast<int>(frames.size()), height, width, Image::kChannels);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const Image& img = stream.frames.at(static_cast<std::size_t>(frames[f])).image;
        if (y0 < 0 || x0 < 0 || y0 + height > img.height() || x0 + width > img.width())
            throw InvalidArgument("crop exceeds the frame");
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < Image::kChannels; ++c)
                    out.at(static_cast<int>(f), y, x, c) = img.at(x0 + x, y0 + y, c);
    }
    return out;
}

Image latent_frame(const Latent& latent, int frame) {
    if (latent.channels != Image::kChannels) throw InvalidArgument("latent is not RGB");
    Image img(latent.width, latent.height);
    for (int y = 0; y < latent.height; ++y)
        for (int x = 0; x < latent.width; ++x)
            for (int c = 0; c < Image::kChannels; ++c) img.at(x, y, c) = static_cast<float>(latent.at(frame, y, x, c));
    return img;
}

ToyExample make_example(const bipack::TrainingTuple& tuple, const ToyConfig& config, const AugmentationPlan* plan) {
    const int n = static_cast<int>(tuple.target_video.size());
    if (n == 0 || static_cast<int>(tuple.input_video.size()) != n) throw InvalidArgument("tuple has no usable frames");
    const Image& first = tuple.target_video.frames.front().image;
    if (first.width() != config.grid_width * config.patch || first.height() != config.grid_height * config.patch)
        throw InvalidArgument("frame size differs from the model grid");

    std::vector<int> frames;
    int y0 = 0, x0 = 0, h = first.height(), w = first.width();
    ToyExample ex;
    if (plan) {
        frames = retime_indices(n, plan->retime);
        if (static_cast<int>(frames.size()) > plan->frames) frames.resize(static_cast<std::size_t>(plan->frames));
        y0 = plan->crop_y * config.patch;
        x0 = plan->crop_x * config.patch;
        h = plan->crop_height * config.patch;
        w = plan->crop_width * config.patch;
        ex.input.patch_y = plan->crop_y;
        ex.input.patch_x = plan->crop_x;
    } else {
        for (int i = 0; i < n; ++i) frames.push_back(i);
    }
    ex.input.condition = latent_from_frames(tuple.input_video, frames, y0, x0, h, w);
    ex.target = latent_from_frames(tuple.target_video, frames, y0, x0, h, w);
    std::vector<LightingCondition> lights;
    for (int f : frames) lights.push_back(tuple.target_lighting.keyframes.at(static_cast<std::size_t>(f)));
    ex.input.lights = token::raw_token_batch(lights, config.tokens);
    return ex;
}

namespace {

Latent gaussian_like(const Latent& shape, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Latent z = Latent::zeros(shape.frames, shape.height, shape.width, shape.channels);
    for (double& v : z.data) v = normal(rng);
    return z;
}

bool all_finite(const std::vector<Param>& params) {
    for (const auto& p : params)
        if (!p.grad.allFinite()) return false;
    return true;
}

// z' = (1 - t') h + t' eps_hat, with eps_hat = (z - (1 - t) h) / t.
void euler_step(Latent& z, const Latent& h, double t, double t_next) {
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double eps = (z.data[i] - (1.0 - t) * h.data[i]) / t;
        z.data[i] = (1.0 - t_next) * h.data[i] + t_next * eps;
    }
}

void check_steps(int n_steps) {
    if (n_steps < 1) throw InvalidArgument("sampling needs at least one step");
}

Latent frame_slice(const Latent& src, int start, int end) {
    Latent out = Latent::zeros(end - start, src.height, src.width, src.channels);
    const std::size_t frame_size = static_cast<std::size_t>(src.height) * src.width * src.channels;
    std::copy(src.data.begin() + static_cast<std::ptrdiff_t>(start * frame_size),
              src.data.begin() + static_cast<std::ptrdiff_t>(end * frame_size), out.data.begin());
    return out;
}

ToyInput window_input(const ToyInput& input, const blend::Window& win) {
    ToyInput out;
    out.condition = frame_slice(input.condition, win.start, win.end);
    out.patch_y = input.patch_y;
    out.patch_x = input.patch_x;
    std::vector<Eigen::Index> rows;
    for (std::size_t r = 0; r < input.lights.frames.size(); ++r) {
        const int f = input.lights.frames[r];
        if (f >= win.start && f < win.end) {
            rows.push_back(static_cast<Eigen::Index>(r));
            out.lights.frames.push_back(f - win.start);
        }
    }
    out.lights.features.resize(static_cast<Eigen::Index>(rows.size()), input.lights.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.lights.features.row(static_cast<Eigen::Index>(i)) = input.lights.features.row(rows[i]);
    return out;
}

}  // namespace

TrainLog train(ToyModel& model, const std::vector<bipack::TrainingTuple>& dataset, const TrainOptions& options) {
    if (dataset.empty()) throw InvalidArgument("training needs a nonempty dataset");
    if (options.steps < 0 || options.batch < 1) throw InvalidArgument("invalid step or batch count");
    if (!(options.t_min > 0.0) || options.t_min > 1.0) throw InvalidArgument("t_min must lie in (0, 1]");
    if (options.lr < 0.0) throw InvalidArgument("learning rate must be nonnegative");

    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    std::uniform_real_distribution<double> time_dist(options.t_min, 1.0);
    auto& params = model.params();
    std::vector<Matrix> m1, m2;
    for (const auto& p : params) {
        m1.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        m2.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }

    TrainLog log;
    log.losses.reserve(static_cast<std::size_t>(options.steps));
    for (int step = 0; step < options.steps; ++step) {
        model.zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < options.batch; ++b) {
            const auto& tuple = dataset[pick(rng)];
            std::optional<AugmentationPlan> plan;
            if (options.augment) plan = sample_augmentation(rng, options.augmentation);
            const ToyExample ex = make_example(tuple, model.config(), plan ? &*plan : nullptr);
            const Latent eps = gaussian_like(ex.target, rng);
            const double t = time_dist(rng);
            batch_loss += model.loss_and_grads(ex.input, ex.target, eps, t);
        }
        batch_loss /= options.batch;
        if (!std::isfinite(batch_loss) || !all_finite(params)) {
            throw TrainingDivergence("non-finite loss or gradient at step " + std::to_string(step) +
                                         " (batch loss " + std::to_string(batch_loss) + ")",
                                     step, model.snapshot());
        }

        const double progress = options.steps > 1 ? static_cast<double>(step) / (options.steps - 1) : 0.0;
        const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        const double lr = options.lr * (options.final_lr_fraction + (1.0 - options.final_lr_fraction) * cosine);
        const double bc1 = 1.0 - std::pow(options.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(options.beta2, step + 1);
        const double inv_batch = 1.0 / options.batch;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Matrix grad = params[i].grad * inv_batch;
            m1[i] = options.beta1 * m1[i] + (1.0 - options.beta1) * grad;
            m2[i] = options.beta2 * m2[i] + (1.0 - options.beta2) * grad.cwiseProduct(grad);
            params[i].value.array() -=
                lr * (m1[i].array() / bc1) / ((m2[i].array() / bc2).sqrt() + options.adam_eps);
        }
        log.losses.push_back(batch_loss);
        if (options.on_step) options.on_step(step, batch_loss);
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return log;
}

Latent sample(const ToyModel& model, const ToyInput& input, int n_steps, std::uint64_t seed) {
    check_steps(n_steps);
    std::mt19937_64 rng(seed);
    Latent z = gaussian_like(input.condition, rng);
    for (int k = 0; k < n_steps; ++k) {
        const double t = 1.0 - static_cast<double>(k) / n_steps;
        const double t_next = 1.0 - static_cast<double>(k + 1) / n_steps;
        const Latent h = model.predict_clean(input, z, t);
        euler_step(z, h, t, t_next);
    }
    return z;
}

Latent sample_long(const ToyModel& model, const ToyInput& input, const blend::WindowPlan& plan, int n_steps,
                   std::uint64_t seed) {
    check_steps(n_steps);
    if (plan.frames != input.condition.frames) throw InvalidArgument("window plan covers a different frame count");
    std::mt19937_64 rng(seed);
    Latent z = gaussian_like(input.condition, rng);
    std::vector<ToyInput> inputs;
    for (const auto& win : plan.windows) inputs.push_back(window_input(input, win));
    const std::size_t frame_size = static_cast<std::size_t>(z.height) * z.width * z.channels;

    for (int k = 0; k < n_steps; ++k) {
        const double t = 1.0 - static_cast<double>(k) / n_steps;
        const double t_next = 1.0 - static_cast<double>(k + 1) / n_steps;
        std::vector<blend::Frames> predictions;
        for (std::size_t w = 0; w < plan.windows.size(); ++w) {
            const auto& win = plan.windows[w];
            const Latent h = model.predict_clean(inputs[w], frame_slice(z, win.start, win.end), t);
            blend::Frames frames(static_cast<std::size_t>(win.length()));
            for (int f = 0; f < win.length(); ++f) {
                const auto begin = h.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(f) * frame_size);
                frames[static_cast<std::size_t>(f)].assign(begin, begin + static_cast<std::ptrdiff_t>(frame_size));
            }
            predictions.push_back(std::move(frames));
        }
        const blend::Frames fused = blend::blend(predictions, plan);
        Latent h = Latent::zeros(z.frames, z.height, z.width, z.channels);
        for (std::size_t f = 0; f < fused.size(); ++f)
            std::copy(fused[f].begin(), fused[f].end(), h.data.begin() + static_cast<std::ptrdiff_t>(f * frame_size));
        euler_step(z, h, t, t_next);
    }
    return z;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries) list.push_back({{"dynamic", e.dynamic}, {"frames", e.frames}, {"psnr", e.psnr}});
    return {{"mean_psnr", mean_psnr},
            {"min_psnr", min_psnr},
            {"mean_static_psnr", mean_static},
            {"mean_dynamic_psnr", mean_dynamic},
            {"entries", list}};
}

EvalReport evaluate(const ToyModel& model, const std::vector<bipack::TrainingTuple>& held_out, int n_steps,
                    std::uint64_t seed) {
    if (held_out.empty()) throw InvalidArgument("evaluation needs at least one tuple");
    EvalReport report;
    double sum_static = 0.0, sum_dynamic = 0.0;
    int n_static = 0, n_dynamic = 0;
    for (std::size_t i = 0; i < held_out.size(); ++i) {
        const ToyExample ex = make_example(held_out[i], model.config());
        const Latent out = sample(model, ex.input, n_steps, seed + i);
        double se = 0.0;
        for (std::size_t j = 0; j < out.data.size(); ++j) {
            const double d = out.data[j] - ex.target.data[j];
            se += d * d;
        }
        const double mse = se / static_cast<double>(out.data.size());
        EvalEntry e;
        e.dynamic = !is_static(held_out[i].target_lighting);
        e.frames = ex.target.frames;
        e.psnr = mse > 0.0 ? std::min(metrics::kPsnrCap, 10.0 * std::log10(1.0 / mse)) : metrics::kPsnrCap;
        (e.dynamic ? sum_dynamic : sum_static) += e.psnr;
        (e.dynamic ? n_dynamic : n_static) += 1;
        report.entries.push_back(e);
    }
    report.min_psnr = report.entries.front().psnr;
    double total = 0.0;
    for (const auto& e : report.entries) {
        total += e.psnr;
        report.min_psnr = std::min(report.min_psnr, e.psnr);
    }
    report.mean_psnr = total / static_cast<double>(report.entries.size());
    report.mean_static = n_static ? sum_static / n_static : 0.0;
    report.mean_dynamic = n_dynamic ? sum_dynamic / n_dynamic : 0.0;
    return report;
}

ToyRunConfig ToyRunConfig::defaults() {
    ToyRunConfig c;
    c.train.steps = 7000;
    c.train.batch = 4;
    c.train.lr = 2e-3;
    // Small t carries a (1 - t)^2 / t^2 weight in the noise loss; a higher floor keeps the
    // gradient from being dominated by near-clean inputs.
    c.train.t_min = 0.2;
    c.data.min_frames = 2;
    c.data.max_frames = 6;
    return c;
}

ToyRunConfig ToyRunConfig::from_json(const nlohmann::json& j) {
    ToyRunConfig c = defaults();
    if (j.contains("model")) c.model = ToyConfig::from_json(j.at("model"));
    if (j.contains("train")) {
        const auto& t = j.at("train");
        c.train.steps = t.value("steps", c.train.steps);
        c.train.batch = t.value("batch", c.train.batch);
        c.train.lr = t.value("lr", c.train.lr);
        c.train.final_lr_fraction = t.value("final_lr_fraction", c.train.final_lr_fraction);
        c.train.t_min = t.value("t_min", c.train.t_min);
        c.train.augment = t.value("augment", c.train.augment);
        c.train.seed = t.value("seed", c.train.seed);
        if (t.contains("augmentation")) {
            const auto& a = t.at("augmentation");
            if (a.is_string()) {
                const auto name = a.get<std::string>();
                if (name == "full_scale") c.train.augmentation = AugmentConfig::full_scale();
                else if (name == "toy") c.train.augmentation = AugmentConfig::toy();
                else throw InvalidArgument("unknown augmentation preset " + name);
            } else {
                auto& g = c.train.augmentation;
                g.min_frames = a.value("min_frames", g.min_frames);
                g.max_frames = a.value("max_frames", g.max_frames);
                g.token_budget = a.value("token_budget", g.token_budget);
                g.min_aspect = a.value("min_aspect", g.min_aspect);
                g.max_aspect = a.value("max_aspect", g.max_aspect);
                g.min_retime = a.value("min_retime", g.min_retime);
                g.max_retime = a.value("max_retime", g.max_retime);
                g.min_side = a.value("min_side", g.min_side);
                g.grid_height = a.value("grid_height", g.grid_height);
                g.grid_width = a.value("grid_width", g.grid_width);
            }
        }
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        c.train_samples = d.value("train_samples", c.train_samples);
        c.eval_samples = d.value("eval_samples", c.eval_samples);
        c.scene_size = d.value("scene_size", c.scene_size);
        c.data.min_frames = d.value("min_frames", c.data.min_frames);
        c.data.max_frames = d.value("max_frames", c.data.max_frames);
        c.data.lighting.min_lights = d.value("min_lights", c.data.lighting.min_lights);
        c.data.lighting.max_lights = d.value("max_lights", c.data.lighting.max_lights);
    }
    c.eval_steps = j.value("eval_steps", c.eval_steps);
    return c;
}

nlohmann::json ToyRunConfig::to_json() const {
    const auto& a = train.augmentation;
    return {{"model", model.to_json()},
            {"train",
             {{"steps", train.steps},
              {"batch", train.batch},
              {"lr", train.lr},
              {"final_lr_fraction", train.final_lr_fraction},
              {"t_min", train.t_min},
              {"augment", train.augment},
              {"augmentation",
               {{"min_frames", a.min_frames},
                {"max_frames", a.max_frames},
                {"token_budget", a.token_budget},
                {"min_aspect", a.min_aspect},
                {"max_aspect", a.max_aspect},
                {"min_retime", a.min_retime},
                {"max_retime", a.max_retime},
                {"min_side", a.min_side},
                {"grid_height", a.grid_height},
                {"grid_width", a.grid_width}}},
              {"seed", train.seed}}},
            {"data",
             {{"train_samples", train_samples},
              {"eval_samples", eval_samples},
              {"scene_size", scene_size},
              {"min_frames", data.min_frames},
              {"max_frames", data.max_frames},
              {"min_lights", data.lighting.min_lights},
              {"max_lights", data.lighting.max_lights}}},
            {"eval_steps", eval_steps}};
}

}  // namespace relux::toy
