#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "relux/error.hpp"
#include "relux/window_blend.hpp"

using namespace relux;
using namespace relux::blend;

namespace {

std::vector<Frames> constant_predictions(const WindowPlan& plan, double value, std::size_t size) {
    std::vector<Frames> p;
    for (const auto& w : plan.windows) p.emplace_back(static_cast<std::size_t>(w.length()), std::vector<double>(size, value));
    return p;
}

}  // namespace

TEST_CASE("plan_windows") {
    SUBCASE("short video is one window") {
        auto p = plan_windows(10, 10, 5);
        REQUIRE(p.windows.size() == 1);
        CHECK(p.windows[0].start == 0);
        CHECK(p.windows[0].end == 10);
        auto q = plan_windows(10, 37, 18);
        REQUIRE(q.windows.size() == 1);
        CHECK(q.windows[0].end == 10);
    }
    SUBCASE("200 frames, window 37, stride 18") {
        auto p = plan_windows(200, 37, 18);
        int max_end = 0;
        for (std::size_t i = 0; i < p.windows.size(); ++i) {
            CHECK(p.windows[i].length() == 37);
            if (i + 1 < p.windows.size()) {
                CHECK(p.windows[i].start == static_cast<int>(i) * 18);
                CHECK(p.windows[i + 1].start > p.windows[i].start);
            }
            max_end = std::max(max_end, p.windows[i].end);
        }
        CHECK(max_end == 200);
        CHECK(p.windows.back().end == 200);
        for (int f = 0; f < 200; ++f) CHECK(p.coverage(f) >= 1);
    }
    SUBCASE("100 frames fit one window of 100") {
        auto p = plan_windows(100, 100, 50);
        CHECK(p.windows.size() == 1);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(plan_windows(10, 5, 0), InvalidArgument);
        CHECK_THROWS_AS(plan_windows(10, 5, 6), InvalidArgument);
        CHECK_THROWS_AS(plan_windows(0, 5, 2), InvalidArgument);
    }
    SUBCASE("parse") {
        auto p = parse_plan("N=200,W=37,S=18");
        CHECK(p.frames == 200);
        CHECK(p.window == 37);
        CHECK(p.stride == 18);
        CHECK(parse_plan("N=100,W=20").stride == 10);
        CHECK_THROWS_AS(parse_plan("N=abc"), InvalidArgument);
    }
}

TEST_CASE("normalized weights are a partition of unity") {
    for (auto [n, w, s] : {std::tuple{200, 37, 18}, std::tuple{100, 37, 18}, std::tuple{50, 10, 3},
                           std::tuple{41, 8, 8}, std::tuple{13, 5, 1}}) {
        auto p = plan_windows(n, w, s);
        for (int f = 0; f < n; ++f) {
            double sum = 0.0;
            for (std::size_t k = 0; k < p.windows.size(); ++k) {
                const double wt = p.normalized_weight(k, f);
                CHECK(wt >= 0.0);
                sum += wt;
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("blend") {
    SUBCASE("constant predictions stay constant") {
        auto p = plan_windows(200, 37, 18);
        for (double c : {0.0, 1.0, 0.1, -3.7, 1e6}) {
            auto out = blend::blend(constant_predictions(p, c, 4), p);
            REQUIRE(out.size() == 200);
            for (const auto& f : out)
                for (double v : f) CHECK(std::abs(v - c) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(c));
        }
    }
    SUBCASE("a single window is the identity") {
        auto p = plan_windows(7, 10, 5);
        std::vector<Frames> pred(1);
        for (int f = 0; f < 7; ++f) pred[0].push_back({0.1 * f, -0.3 * f});
        CHECK(blend::blend(pred, p) == pred[0]);
    }
    SUBCASE("two windows mix convexly and continuously") {
        auto p = plan_windows(12, 8, 4);
        REQUIRE(p.windows.size() == 2);
        std::vector<Frames> pred = {Frames(8, std::vector<double>{1.0}), Frames(8, std::vector<double>{3.0})};
        auto out = blend::blend(pred, p);
        for (int f = 0; f < 4; ++f) CHECK(out[static_cast<std::size_t>(f)][0] == 1.0);
        for (int f = 8; f < 12; ++f) CHECK(out[static_cast<std::size_t>(f)][0] == 3.0);
        double prev = out[3][0];
        for (int f = 4; f < 8; ++f) {
            const double v = out[static_cast<std::size_t>(f)][0];
            CHECK(v >= 1.0);
            CHECK(v <= 3.0);
            CHECK(v >= prev);
            // Value follows the normalized weight: 1 * w0 + 3 * w1.
            CHECK(std::abs(v - (1.0 * p.normalized_weight(0, f) + 3.0 * p.normalized_weight(1, f))) < 1e-12);
            prev = v;
        }
        // Steps across the overlap are smaller than the full jump.
        for (int f = 1; f < 12; ++f)
            CHECK(std::abs(out[static_cast<std::size_t>(f)][0] - out[static_cast<std::size_t>(f - 1)][0]) < 2.0);
    }
    SUBCASE("output stays inside the per-frame range of its inputs") {
        auto p = plan_windows(60, 16, 5);
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g(0, 1);
        std::vector<Frames> pred;
        for (const auto& w : p.windows) {
            Frames fr;
            for (int i = 0; i < w.length(); ++i) fr.push_back({g(rng), g(rng)});
            pred.push_back(fr);
        }
        auto out = blend::blend(pred, p);
        for (int f = 0; f < 60; ++f) {
            for (std::size_t c = 0; c < 2; ++c) {
                double lo = 1e9, hi = -1e9;
                int covering = 0;
                for (std::size_t k = 0; k < p.windows.size(); ++k) {
                    const auto& w = p.windows[k];
                    if (f < w.start || f >= w.end) continue;
                    const double v = pred[k][static_cast<std::size_t>(f - w.start)][c];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                    ++covering;
                }
                const double o = out[static_cast<std::size_t>(f)][c];
                CHECK(o >= lo - 1e-12);
                CHECK(o <= hi + 1e-12);
                if (covering == 1) CHECK(o == lo);
            }
        }
    }
    SUBCASE("shape errors") {
        auto p = plan_windows(20, 8, 4);
        auto pred = constant_predictions(p, 1.0, 3);
        pred.pop_back();
        CHECK_THROWS_AS(blend::blend(pred, p), InvalidArgument);
        pred = constant_predictions(p, 1.0, 3);
        pred[1].pop_back();
        CHECK_THROWS_AS(blend::blend(pred, p), InvalidArgument);
        pred = constant_predictions(p, 1.0, 3);
        pred[2][0].push_back(1.0);
        CHECK_THROWS_AS(blend::blend(pred, p), InvalidArgument);
    }
}
