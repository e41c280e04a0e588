#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "relux/error.hpp"
#include "relux/metrics.hpp"
#include "relux/toy/augment.hpp"
#include "relux/toy/model.hpp"
#include "relux/toy/scene.hpp"
#include "relux/toy/trainer.hpp"

using namespace relux;
using namespace relux::toy;

namespace {

ToyConfig tiny_config() {
    ToyConfig c;
    c.width = 16;
    c.blocks = 2;
    c.heads = 2;
    c.ffn_hidden = 32;
    return c;
}

Latent noise_like(const Latent& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    Latent out = shape;
    for (double& v : out.data) v = g(rng);
    return out;
}

double latent_psnr(const Latent& a, const Latent& b) {
    double se = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return 10 * std::log10(static_cast<double>(a.data.size()) / se);
}

double mean_abs_diff(const Latent& a, const Latent& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

// A model trained with the default run configuration, shared by the tests that need one.
struct Trained {
    LambertianScene scene = LambertianScene::sphere(16);
    std::vector<bipack::TrainingTuple> held_out;
    ToyModel model;

    Trained() {
        const auto run = ToyRunConfig::defaults();
        auto data = make_toy_dataset(scene, run.train_samples, 1);
        held_out = make_toy_dataset(scene, 8, 2);
        model = ToyModel(run.model, 3);
        train(model, data, run.train);
    }
};

const Trained& trained() {
    static const Trained t;
    return t;
}

}  // namespace

TEST_CASE("lambertian renderer") {
    auto scene = LambertianScene::sphere(16);
    scene.validate();
    SUBCASE("zero lighting is black") {
        const Image black = render_lambertian(scene, {});
        for (float v : black.data()) CHECK(v == 0.0f);
    }
    SUBCASE("rendering is additive") {
        std::mt19937_64 rng(1);
        auto a = sample_lighting(rng, 1, false).keyframes[0];
        auto b = sample_lighting(rng, 1, false).keyframes[0];
        const Image ra = render_lambertian(scene, a), rb = render_lambertian(scene, b);
        const Image rab = render_lambertian(scene, combine(a, b));
        for (std::size_t i = 0; i < rab.data().size(); ++i)
            CHECK(std::abs(rab.data()[i] - (ra.data()[i] + rb.data()[i])) < 1e-6);
    }
    SUBCASE("zenith light on an up-facing unit-albedo pixel") {
        LambertianScene s;
        s.width = 1;
        s.height = 1;
        s.normals = {{0, 1, 0}};
        s.albedo = {{1, 1, 1}};
        LightingCondition l;
        l.lights.push_back({Direction(0, 1, 0), Rgb{0.3, 0.6, 0.9}});
        auto img = render_lambertian(s, l);
        CHECK(img.at(0, 0, 0) == doctest::Approx(0.3));
        CHECK(img.at(0, 0, 2) == doctest::Approx(0.9));
    }
    SUBCASE("background stays black and lit pixels follow n dot l") {
        LightingCondition l;
        const Direction d = Direction::normalized({0.3, 0.5, 0.8});
        l.lights.push_back({d, Rgb{1, 1, 1}});
        auto img = render_lambertian(scene, l);
        CHECK(img.at(0, 0, 0) == 0.0f);
        const auto i = static_cast<std::size_t>(8 * 16 + 9);
        const double expect = std::max(0.0, dot(scene.normals[i], d.vec())) * scene.albedo[i].g;
        CHECK(img.at(9, 8, 1) == doctest::Approx(expect).epsilon(1e-6));
    }
    SUBCASE("olat stack of the scene relights exactly") {
        auto layout = SphereLayout::make_default(32);
        auto stack = render_olat_stack(scene, layout);
        LightingCondition l;
        l.lights.push_back({layout.directions[4], Rgb{0.5, 0.2, 0.1}});
        l.lights.push_back({layout.directions[20], Rgb{0.1, 0.4, 0.3}});
        const Image a = olat::composite(stack, l), b = render_lambertian(scene, l);
        for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-6);
    }
    SUBCASE("invalid scenes") {
        auto s = scene;
        s.albedo[100].r = 1.5;
        CHECK_THROWS_AS(s.validate(), InvalidArgument);
        s = scene;
        s.normals.pop_back();
        CHECK_THROWS_AS(s.validate(), InvalidArgument);
    }
}

TEST_CASE("toy dataset") {
    auto scene = LambertianScene::sphere(16);
    auto data = make_toy_dataset(scene, 40, 5);
    int dynamic = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& t = data[i];
        t.validate();
        CHECK(t.input_video.size() >= 2);
        CHECK(t.input_video.size() <= 6);
        const bool is_dyn = !is_static(t.target_lighting);
        CHECK(is_dyn == (i % 2 == 1));
        dynamic += is_dyn;
        if (!is_dyn)
            for (const auto& f : t.target_video.frames) CHECK(f.image == t.target_video.frames[0].image);
        for (std::size_t f = 0; f < t.target_video.size(); ++f)
            CHECK(t.target_video.frames[f].image == render_lambertian(scene, t.target_lighting.keyframes[f]));
    }
    CHECK(dynamic == 20);

    auto again = make_toy_dataset(scene, 40, 5);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(again[i].target_video.frames.back().image == data[i].target_video.frames.back().image);
        CHECK(again[i].input_video.frames[0].image == data[i].input_video.frames[0].image);
    }
}

TEST_CASE("flow_forward") {
    auto z0 = noise_like(Latent::zeros(2, 4, 4, 3), 1);
    auto eps = noise_like(z0, 2);
    CHECK(flow_forward(z0, eps, 0.0).data == z0.data);
    CHECK(flow_forward(z0, eps, 1.0).data == eps.data);
    const auto mid = flow_forward(z0, eps, 0.5);
    const auto q0 = flow_forward(z0, eps, 0.0), q1 = flow_forward(z0, eps, 0.25);
    for (std::size_t i = 0; i < z0.data.size(); ++i) {
        CHECK(mid.data[i] == doctest::Approx(0.5 * (z0.data[i] + eps.data[i])));
        CHECK(std::abs(q1.data[i] - 0.5 * (q0.data[i] + mid.data[i])) < 1e-12);
    }
}

TEST_CASE("augmentation") {
    SUBCASE("toy ranges") {
        const auto cfg = AugmentConfig::toy();
        std::mt19937_64 rng(1);
        for (int i = 0; i < 2000; ++i) {
            const auto p = sample_augmentation(rng, cfg);
            CHECK(p.aspect >= cfg.min_aspect - 1e-12);
            CHECK(p.aspect <= cfg.max_aspect + 1e-12);
            CHECK(p.frames >= cfg.min_frames);
            CHECK(p.frames <= cfg.max_frames);
            CHECK(p.tokens() <= cfg.token_budget);
            CHECK(p.crop_y + p.crop_height <= cfg.grid_height);
            CHECK(p.crop_x + p.crop_width <= cfg.grid_width);
            CHECK(p.crop_height >= cfg.min_side);
            CHECK(p.crop_width >= cfg.min_side);
            CHECK(p.retime >= cfg.min_retime);
            CHECK(p.retime <= cfg.max_retime);
            CHECK(std::abs(p.aspect - static_cast<double>(p.crop_width) / p.crop_height) < 1e-12);
        }
    }
    SUBCASE("full-scale ranges") {
        const auto cfg = AugmentConfig::full_scale();
        CHECK(cfg.min_aspect == 0.5);
        CHECK(cfg.max_aspect == 2.0);
        CHECK(cfg.min_frames == 9);
        CHECK(cfg.max_frames == 37);
        CHECK(cfg.token_budget == 5000);
        std::mt19937_64 rng(2);
        std::set<int> lengths;
        for (int i = 0; i < 2000; ++i) {
            const auto p = sample_augmentation(rng, cfg);
            CHECK(p.tokens() <= 5000);
            CHECK(p.aspect >= 0.5 - 1e-12);
            CHECK(p.aspect <= 2.0 + 1e-12);
            lengths.insert(p.frames);
        }
        CHECK(*lengths.begin() == 9);
        CHECK(*lengths.rbegin() == 37);
    }
    SUBCASE("retiming") {
        CHECK(retime_indices(5, 1.0) == std::vector<int>{0, 1, 2, 3, 4});
        CHECK(retime_indices(8, 2.0) == std::vector<int>{0, 2, 4, 6});
        CHECK(retime_indices(6, 1.5) == std::vector<int>{0, 2, 3, 5});
    }
    SUBCASE("infeasible budget") {
        auto cfg = AugmentConfig::toy();
        cfg.token_budget = cfg.min_frames * cfg.min_side * cfg.min_side - 1;
        std::mt19937_64 rng(3);
        CHECK_THROWS_AS(sample_augmentation(rng, cfg), InvalidArgument);
    }
}

TEST_CASE("gradient check on a tiny model") {
    auto scene = LambertianScene::sphere(16);
    ToyDatasetOptions o;
    o.min_frames = o.max_frames = 3;
    auto data = make_toy_dataset(scene, 2, 5, o);
    const auto cfg = tiny_config();
    ToyModel model(cfg, 3);
    AugmentationPlan plan;
    plan.frames = 3;
    plan.crop_y = 2;
    plan.crop_x = 1;
    plan.crop_height = 3;
    plan.crop_width = 4;
    const auto ex = make_example(data[1], cfg, &plan);
    const auto eps = noise_like(ex.target, 9);
    for (double t : {0.3, 0.9}) {
        const auto checks = check_gradients(model, ex.input, ex.target, eps, t, 96, 11);
        CHECK(checks.size() == 96);
        std::set<std::string> groups;
        double worst = 0;
        for (const auto& c : checks) {
            worst = std::max(worst, c.relative_error);
            groups.insert(c.param.substr(0, c.param.find('.')));
        }
        CHECK(worst < 1e-3);
        CHECK(groups.count("light") == 1);
        CHECK(groups.count("block1") == 1);
    }
}

TEST_CASE("loss is zero when the prediction is exact") {
    const auto cfg = tiny_config();
    ToyModel model(cfg, 1);
    // Zeroing the head makes h = head bias = 0, so a zero clean video gives eps_hat == eps exactly.
    for (const char* name : {"head.w", "head.b"}) model.params()[model.find(name)].value.setZero();
    auto scene = LambertianScene::sphere(16);
    auto ex = make_example(make_toy_dataset(scene, 1, 1)[0], cfg);
    const Latent z0 = Latent::zeros(ex.target.frames, ex.target.height, ex.target.width, 3);
    const auto eps = noise_like(z0, 2);
    model.zero_grad();
    CHECK(model.loss_and_grads(ex.input, z0, eps, 0.5) == 0.0);
    for (const auto& p : model.params()) CHECK(p.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predictions are consistent") {
    const auto cfg = tiny_config();
    ToyModel model(cfg, 4);
    auto ex = make_example(make_toy_dataset(LambertianScene::sphere(16), 1, 3)[0], cfg);
    const auto z = noise_like(ex.target, 5);
    for (double t : {0.2, 1.0}) {
        const auto h = model.predict_clean(ex.input, z, t);
        const auto e = model.predict_noise(ex.input, z, t);
        for (std::size_t i = 0; i < z.data.size(); ++i) CHECK(std::abs(z.data[i] - t * e.data[i] - (1 - t) * h.data[i]) < 1e-12);
    }
    CHECK_THROWS_AS(model.predict_clean(ex.input, z, 0.0), InvalidArgument);
    CHECK_THROWS_AS(model.predict_clean(ex.input, z, 1.5), InvalidArgument);
}

TEST_CASE("frame isolation at the first cross-attention") {
    const auto cfg = tiny_config();
    ToyModel model(cfg, 6);
    ToyDatasetOptions o;
    o.min_frames = o.max_frames = 4;
    auto ex = make_example(make_toy_dataset(LambertianScene::sphere(16), 2, 7, o)[1], cfg);
    const auto z = noise_like(ex.target, 8);
    ForwardTrace base;
    model.predict_clean(ex.input, z, 0.6, &base);
    for (int k = 0; k < 4; ++k) {
        ToyInput moved = ex.input;
        for (Eigen::Index r = 0; r < moved.lights.features.rows(); ++r)
            if (moved.lights.frames[static_cast<std::size_t>(r)] == k) moved.lights.features.row(r).array() += 0.7;
        ForwardTrace trace;
        model.predict_clean(moved, z, 0.6, &trace);
        const Matrix& a = base.cross_attention_output(0);
        const Matrix& b = trace.cross_attention_output(0);
        bool changed = false;
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            if (trace.token_frames[static_cast<std::size_t>(r)] == k) {
                changed |= (a.row(r) - b.row(r)).cwiseAbs().maxCoeff() > 0;
            } else {
                CHECK((a.row(r).array() == b.row(r).array()).all());
            }
        }
        CHECK(changed);
    }
}

TEST_CASE("training") {
    auto scene = LambertianScene::sphere(16);
    auto data = make_toy_dataset(scene, 8, 1);
    const auto cfg = tiny_config();
    SUBCASE("zero learning rate leaves parameters alone") {
        ToyModel model(cfg, 2);
        const auto before = model.snapshot();
        TrainOptions opt;
        opt.steps = 5;
        opt.lr = 0.0;
        train(model, data, opt);
        const auto after = model.snapshot();
        for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
    }
    SUBCASE("seeded reruns are bit-identical") {
        TrainOptions opt;
        opt.steps = 20;
        opt.lr = 1e-3;
        opt.seed = 4;
        ToyModel a(cfg, 2), b(cfg, 2);
        const auto la = train(a, data, opt), lb = train(b, data, opt);
        CHECK(la.losses == lb.losses);
        CHECK(a.snapshot() == b.snapshot());
    }
    SUBCASE("overfitting one sample lowers the loss") {
        std::vector<bipack::TrainingTuple> one = {data[1]};
        ToyModel model(cfg, 3);
        TrainOptions opt;
        opt.steps = 200;
        opt.lr = 3e-3;
        opt.augment = false;
        opt.batch = 2;
        opt.t_min = 0.2;
        const auto log = train(model, one, opt);
        auto mean = [&](std::size_t lo, std::size_t hi) {
            double s = 0;
            for (std::size_t i = lo; i < hi; ++i) s += log.losses[i];
            return s / static_cast<double>(hi - lo);
        };
        CHECK(mean(180, 200) < 0.5 * mean(0, 20));
    }
    SUBCASE("divergence keeps the last finite parameters") {
        ToyModel model(cfg, 2);
        model.params()[model.find("head.b")].value(0, 0) = std::numeric_limits<double>::quiet_NaN();
        TrainOptions opt;
        opt.steps = 3;
        try {
            train(model, data, opt);
            FAIL("expected TrainingDivergence");
        } catch (const TrainingDivergence& e) {
            CHECK(e.step() == 0);
            CHECK(e.checkpoint().size() == model.params().size());
        }
    }
    SUBCASE("argument errors") {
        ToyModel model(cfg, 2);
        TrainOptions opt;
        CHECK_THROWS_AS(train(model, {}, opt), InvalidArgument);
        opt.lr = -1;
        CHECK_THROWS_AS(train(model, data, opt), InvalidArgument);
    }
}

TEST_CASE("sampling") {
    const auto cfg = tiny_config();
    ToyModel model(cfg, 5);
    auto ex = make_example(make_toy_dataset(LambertianScene::sphere(16), 1, 3)[0], cfg);
    CHECK_THROWS_AS(sample(model, ex.input, 0, 1), InvalidArgument);
    SUBCASE("one step is one reconstruction from pure noise") {
        const auto out = sample(model, ex.input, 1, 7);
        std::mt19937_64 rng(7);
        std::normal_distribution<double> g(0, 1);
        Latent z = ex.input.condition;
        for (double& v : z.data) v = g(rng);
        const auto h = model.predict_clean(ex.input, z, 1.0);
        for (std::size_t i = 0; i < h.data.size(); ++i) CHECK(std::abs(out.data[i] - h.data[i]) < 1e-12);
    }
    SUBCASE("deterministic under a seed") {
        CHECK(sample(model, ex.input, 4, 9).data == sample(model, ex.input, 4, 9).data);
        CHECK(sample(model, ex.input, 4, 9).data != sample(model, ex.input, 4, 10).data);
    }
    SUBCASE("long sampler with one window equals the plain sampler") {
        const auto plan = blend::plan_windows(ex.input.condition.frames, 37, 18);
        const auto a = sample(model, ex.input, 5, 3), b = sample_long(model, ex.input, plan, 5, 3);
        for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-12);
    }
}

TEST_CASE("model file round trip") {
    const auto cfg = tiny_config();
    ToyModel model(cfg, 8);
    const auto path = (std::filesystem::temp_directory_path() / "relux_test_model.bin").string();
    model.save(path);
    const auto back = ToyModel::load(path);
    CHECK(back.parameter_count() == model.parameter_count());
    CHECK(back.snapshot() == model.snapshot());
    CHECK(back.config().to_json() == model.config().to_json());
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << "RLXM garbage";
    }
    CHECK_THROWS(ToyModel::load(path));
    std::filesystem::remove(path);
}

TEST_CASE("run config round trip") {
    const auto c = ToyRunConfig::defaults();
    const auto back = ToyRunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK_THROWS_AS(ToyRunConfig::from_json(nlohmann::json::parse(R"({"model":{"width":-3}})")), InvalidArgument);
}

TEST_CASE("trained model uses the lighting tokens") {
    // Differences are pooled over the held-out set.
    const auto& t = trained();
    double swap = 0.0, reseed = 0.0;
    for (std::size_t i = 0; i < t.held_out.size(); ++i) {
        const auto ex = make_example(t.held_out[i], t.model.config());
        const auto& other = t.held_out[(i + 1) % t.held_out.size()].target_lighting.keyframes;
        ToyInput swapped = ex.input;
        std::vector<LightingCondition> lights;
        for (std::size_t f = 0; f < static_cast<std::size_t>(ex.input.condition.frames); ++f)
            lights.push_back(other[std::min(f, other.size() - 1)]);
        swapped.lights = token::raw_token_batch(lights, t.model.config().tokens);

        const auto base = sample(t.model, ex.input, 20, 1);
        reseed += mean_abs_diff(base, sample(t.model, ex.input, 20, 2));
        swap += mean_abs_diff(base, sample(t.model, swapped, 20, 1));
    }
    MESSAGE("light swap vs reseed mean abs diff: ", swap / t.held_out.size(), " vs ", reseed / t.held_out.size());
    CHECK(swap > 10 * reseed);
}

TEST_CASE("trained model: more sampling steps change little") {
    const auto& t = trained();
    double p20 = 0.0, p40 = 0.0;
    for (const auto& tuple : t.held_out) {
        const auto ex = make_example(tuple, t.model.config());
        p20 += latent_psnr(sample(t.model, ex.input, 20, 5), ex.target) / t.held_out.size();
        p40 += latent_psnr(sample(t.model, ex.input, 40, 5), ex.target) / t.held_out.size();
    }
    MESSAGE("mean PSNR at 20 and 40 steps: ", p20, " ", p40);
    CHECK(std::abs(p40 - p20) < 0.5);
}

TEST_CASE("trained model linearity is reported") {
    const auto& t = trained();
    const auto& tuple = t.held_out[0];
    const auto condition = make_example(tuple, t.model.config()).input.condition;
    const int frames = condition.frames;
    auto relight = [&](const LightingCondition& l) {
        ToyInput in;
        in.condition = condition;
        std::vector<LightingCondition> per(static_cast<std::size_t>(frames), l);
        in.lights = token::raw_token_batch(per, t.model.config().tokens);
        return latent_frame(sample(t.model, in, 20, 3), 0);
    };
    std::mt19937_64 rng(4);
    ToyLightingRanges half;
    half.max_intensity = 0.5;
    half.min_intensity = 0.15;
    const auto a = sample_lighting(rng, 1, false, half).keyframes[0];
    const auto b = sample_lighting(rng, 1, false, half).keyframes[0];
    const auto r = metrics::linearity_report(relight, a, b, 1.5);
    MESSAGE("toy model linearity residuals: combination ", r.combination_residual, ", scaling ",
            r.scaling_residual);
    CHECK(std::isfinite(r.combination_residual));
    CHECK(std::isfinite(r.scaling_residual));
}
