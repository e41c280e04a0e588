#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "relux/compositor.hpp"
#include "relux/error.hpp"
#include "relux/metrics.hpp"
#include "relux/parallel.hpp"

using namespace relux;
using namespace relux::olat;

namespace {

OlatStack random_stack(std::size_t lights, int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    OlatStack s;
    s.layout = SphereLayout::make_default(lights);
    for (std::size_t i = 0; i < lights; ++i) {
        Image img(w, h);
        for (float& v : img.data()) v = u(rng);
        s.basis.push_back(img);
    }
    return s;
}

LightingCondition random_lighting(const SphereLayout& layout, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 3.0);
    LightingCondition c;
    for (const auto& d : layout.directions) c.lights.push_back({d, Rgb{u(rng), u(rng), u(rng)}});
    return c;
}

double rel_l2(const Image& a, const Image& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        num += d * d;
        den += static_cast<double>(a.data()[i]) * a.data()[i];
    }
    return std::sqrt(num / den);
}

Image add(const Image& a, const Image& b) {
    Image out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Rgb brute_flux(const Image& img) {
    Rgb sum;
    const auto w = static_cast<std::size_t>(img.width()), h = static_cast<std::size_t>(img.height());
    for (std::size_t y = 0; y < h; ++y) {
        const double sa = std::sin(std::numbers::pi * (y + 0.5) / h) * (2 * std::numbers::pi / w) *
                          (std::numbers::pi / h);
        for (std::size_t x = 0; x < w; ++x) {
            const int xi = static_cast<int>(x), yi = static_cast<int>(y);
            sum += Rgb{img.at(xi, yi, 0), img.at(xi, yi, 1), img.at(xi, yi, 2)} * sa;
        }
    }
    return sum;
}

}  // namespace

TEST_CASE("composite basics") {
    auto stack = random_stack(16, 8, 6, 1);
    SUBCASE("zero lighting is black") {
        LightingCondition zero;
        for (const auto& d : stack.layout.directions) zero.lights.push_back({d, Rgb{}});
        const Image black = composite(stack, zero);
        for (float v : black.data()) CHECK(v == 0.0f);
    }
    SUBCASE("one unit light gives its basis image") {
        for (std::size_t i : {0u, 7u, 15u}) {
            LightingCondition one;
            one.lights.push_back({stack.layout.directions[i], Rgb{1, 1, 1}});
            CHECK(composite(stack, one) == stack.basis[i]);
        }
    }
    SUBCASE("per-channel weights scale channels independently") {
        LightingCondition one;
        one.lights.push_back({stack.layout.directions[3], Rgb{2, 0, 0.5}});
        auto out = composite(stack, one);
        CHECK(out.at(1, 1, 0) == doctest::Approx(2 * stack.basis[3].at(1, 1, 0)));
        CHECK(out.at(1, 1, 1) == 0.0f);
        CHECK(out.at(1, 1, 2) == doctest::Approx(0.5 * stack.basis[3].at(1, 1, 2)));
    }
    SUBCASE("unmatched direction is rejected") {
        LightingCondition off;
        off.lights.push_back({Direction(0, -1, 0), Rgb{1, 1, 1}});
        CHECK_THROWS_AS(composite(stack, off), InvalidArgument);
        CHECK_NOTHROW(resolve_weights(stack, off, std::numeric_limits<double>::infinity()));
    }
    SUBCASE("scale multiplies the output") {
        stack.scale = 2.0;
        LightingCondition one;
        one.lights.push_back({stack.layout.directions[0], Rgb{1, 1, 1}});
        CHECK(composite(stack, one).at(2, 2, 1) == doctest::Approx(2 * stack.basis[0].at(2, 2, 1)));
    }
}

TEST_CASE("composite is linear") {
    auto stack = random_stack(64, 16, 12, 2);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        auto a = random_lighting(stack.layout, rng);
        auto b = random_lighting(stack.layout, rng);
        CHECK(rel_l2(composite(stack, combine(a, b)), add(composite(stack, a), composite(stack, b))) < 1e-5);
        const double alpha = 0.1 + 3.0 * trial;
        Image scaled = composite(stack, a);
        for (float& v : scaled.data()) v = static_cast<float>(v * alpha);
        CHECK(rel_l2(composite(stack, a.scaled(alpha)), scaled) < 1e-5);
    }
}

TEST_CASE("composite does not depend on the thread count") {
    auto stack = random_stack(100, 32, 20, 3);
    std::mt19937_64 rng(1);
    auto l = random_lighting(stack.layout, rng);
    set_thread_count(1);
    auto one = composite(stack, l);
    set_thread_count(4);
    auto four = composite(stack, l);
    set_thread_count(0);
    CHECK(one == four);
}

TEST_CASE("nearest direction index agrees with brute force") {
    for (std::size_t n : {1u, 5u, 64u, 1600u}) {
        auto layout = SphereLayout::make_default(n);
        NearestDirectionIndex index(layout);
        std::mt19937_64 rng(n);
        std::normal_distribution<double> g(0, 1);
        for (int i = 0; i < 2000; ++i) {
            const auto d = Direction::normalized({g(rng), g(rng), g(rng)});
            CHECK(index.nearest(d) == layout.nearest(d));
        }
        for (const auto& d : layout.directions) CHECK(index.nearest(d) == layout.nearest(d));
    }
}

TEST_CASE("hdri_to_lights") {
    auto layout = SphereLayout::make_default(64);
    SUBCASE("uniform white conserves 4 pi") {
        HdriImage env(Image(64, 32, 1.0f));
        auto lights = hdri_to_lights(env, layout, 0.0);
        REQUIRE(lights.size() == layout.size());
        const Rgb sum = lights.total_intensity();
        const Rgb ref = brute_flux(env.image());
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(sum[c] - ref[c]) / ref[c] < 1e-5);
            CHECK(std::abs(sum[c] - 4 * std::numbers::pi) / (4 * std::numbers::pi) < 1e-3);
        }
    }
    SUBCASE("drop mode keeps only the upper half") {
        HdriImage env(Image(64, 32, 1.0f));
        const Rgb sum = hdri_to_lights(env, layout, 0.0, LowerHemisphere::Drop).total_intensity();
        CHECK(std::abs(sum.r - 2 * std::numbers::pi) / (2 * std::numbers::pi) < 1e-2);
    }
    SUBCASE("random environments conserve flux at any rotation") {
        std::mt19937_64 rng(4);
        std::exponential_distribution<float> e(1.0f);
        Image img(48, 24);
        for (float& v : img.data()) v = e(rng);
        HdriImage env(img);
        const Rgb ref = brute_flux(img);
        for (double rot : {0.0, 17.0, 90.0, -133.5, 720.0}) {
            const Rgb sum = hdri_to_lights(env, layout, rot).total_intensity();
            for (int c = 0; c < 3; ++c) CHECK(std::abs(sum[c] - ref[c]) / ref[c] < 1e-5);
        }
    }
    SUBCASE("a single bright pixel lands on its light") {
        const int w = 128, h = 64;
        const std::size_t target = 10;
        const auto uv = dir_to_latlong(layout.directions[target]);
        Image img(w, h);
        const int px = std::min(w - 1, static_cast<int>(uv.u * w));
        const int py = std::min(h - 1, static_cast<int>(uv.v * h));
        for (int c = 0; c < 3; ++c) img.at(px, py, c) = 100.0f;
        const Direction centre = latlong_to_dir((px + 0.5) / w, (py + 0.5) / h);
        REQUIRE(layout.nearest(centre) == target);
        auto lights = hdri_to_lights(HdriImage(img), layout, 0.0);
        for (std::size_t i = 0; i < lights.size(); ++i) {
            if (i == target)
                CHECK(lights.lights[i].intensity.r > 0.0);
            else
                CHECK(lights.lights[i].intensity.r == 0.0);
        }
    }
    SUBCASE("full turn is periodic") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<float> u(0, 1);
        Image img(64, 32);
        for (float& v : img.data()) v = u(rng);
        HdriImage env(img);
        auto a = hdri_to_lights(env, layout, 30.0);
        auto b = hdri_to_lights(env, layout, 390.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(a.lights[i].intensity[c] - b.lights[i].intensity[c]) <=
                      1e-6 * std::max(1.0, a.lights[i].intensity[c]));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(HdriImage(Image(10, 10, 1.0f)), InvalidArgument);
        CHECK_THROWS_AS(HdriImage(Image(4, 2, -1.0f)), InvalidArgument);
        CHECK_THROWS_AS(hdri_to_lights(HdriImage(Image(4, 2, 1.0f)), SphereLayout{}, 0.0), InvalidArgument);
    }
}

TEST_CASE("pseudo_video") {
    Image grid(20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            for (int c = 0; c < 3; ++c) grid.at(x, y, c) = static_cast<float>((x * 7 + y * 3 + c) % 11);

    SUBCASE("identity motion repeats the image") {
        auto v = pseudo_video(grid, 5, MotionSpec::constant(5, {}));
        REQUIRE(v.size() == 5);
        for (const auto& f : v.frames) CHECK(f.image == grid);
        v.validate();
    }
    SUBCASE("integer translation shifts pixels") {
        auto v = pseudo_video(grid, 3, MotionSpec::constant(3, {2.0, 1.0, 1.0}));
        CHECK(v.frames[0].image == grid);
        const Image& f2 = v.frames[2].image;  // moved by (4, 2)
        for (int y = 2; y < 20; ++y)
            for (int x = 4; x < 20; ++x)
                for (int c = 0; c < 3; ++c) CHECK(f2.at(x, y, c) == grid.at(x - 4, y - 2, c));
    }
    SUBCASE("zoom in then out returns near the start") {
        Image blob(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double r2 = (x - 31.5) * (x - 31.5) + (y - 31.5) * (y - 31.5);
                for (int c = 0; c < 3; ++c)
                    blob.at(x, y, c) = static_cast<float>(0.2 + 0.6 * std::exp(-r2 / (2 * 8.0 * 8.0)) + 0.05 * c);
            }
        MotionSpec m;
        m.steps = {{0, 0, 2.0}, {0, 0, 0.5}};
        auto v = pseudo_video(blob, 3, m);
        CHECK(metrics::psnr(v.frames[2].image, blob) > 35.0);
    }
    SUBCASE("bad zoom") {
        CHECK_THROWS_AS(pseudo_video(grid, 2, MotionSpec::constant(2, {0, 0, 0.0})), InvalidArgument);
        CHECK_THROWS_AS(warp_similarity(grid, {0, 0, -1.0}), InvalidArgument);
    }
}

TEST_CASE("build_olat_dataset") {
    auto stack = random_stack(32, 8, 8, 5);
    std::vector<HdriImage> hdris;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> u(0, 2);
    for (int i = 0; i < 10; ++i) {
        Image img(32, 16);
        for (float& v : img.data()) v = u(rng);
        hdris.emplace_back(img);
    }
    SUBCASE("one condition, two hdris") {
        auto ds = build_olat_dataset(stack, std::span(hdris).first(2), 1, 4, 7);
        REQUIRE(ds.tuples.size() == 1);
        const auto& t = ds.tuples[0];
        t.validate();
        CHECK(t.input_video.size() == 4);
        const auto lit = composite(stack, hdri_to_lights(hdris[ds.records[0].input_hdri], stack.layout,
                                                         ds.records[0].input_rotation));
        CHECK(metrics::psnr(t.input_video.frames[0].image, lit, nullptr, 10.0) > 80.0);
    }
    SUBCASE("deterministic under a seed") {
        auto a = build_olat_dataset(stack, hdris, 5, 3, 42);
        auto b = build_olat_dataset(stack, hdris, 5, 3, 42);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(a.records[i].input_hdri == b.records[i].input_hdri);
            CHECK(a.records[i].input_rotation == b.records[i].input_rotation);
            CHECK(a.tuples[i].target_video.frames[2].image == b.tuples[i].target_video.frames[2].image);
        }
    }
    SUBCASE("rotations are distinct") {
        auto ds = build_olat_dataset(stack, hdris, 50, 2, 3);
        std::set<double> rots;
        for (const auto& r : ds.records) {
            rots.insert(r.input_rotation);
            rots.insert(r.target_rotation);
        }
        CHECK(rots.size() == 100);
    }
    SUBCASE("input and target follow the same motion") {
        auto ds = build_olat_dataset(stack, hdris, 3, 4, 11);
        for (std::size_t i = 0; i < ds.tuples.size(); ++i) {
            const auto& rec = ds.records[i];
            const auto lit = composite(stack, hdri_to_lights(hdris[rec.target_hdri], stack.layout, rec.target_rotation));
            const auto expect = pseudo_video(lit, 4, MotionSpec::constant(4, rec.motion_step));
            for (std::size_t f = 0; f < 4; ++f)
                CHECK(metrics::psnr(expect.frames[f].image, ds.tuples[i].target_video.frames[f].image, nullptr, 10.0) >
                      80.0);
        }
    }
    SUBCASE("empty hdri set") { CHECK_THROWS_AS(build_olat_dataset(stack, {}, 1, 2, 0), InvalidArgument); }
}
