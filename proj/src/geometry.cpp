#include "relux/geometry.hpp"

#include <algorithm>
#include <string>

#include "relux/error.hpp"

namespace relux {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kUnitTolerance = 1e-6;

}  // namespace

Direction::Direction(const Vec3& v) : v_(v) {
    const double n = v.norm();
    if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
        throw InvalidArgument("direction is not unit length (norm " + std::to_string(n) + ")");
    }
}

Direction Direction::normalized(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 1e-300) || !std::isfinite(n)) {
        throw InvalidArgument("cannot normalize a zero or non-finite vector");
    }
    return Direction(v * (1.0 / n));
}

double angle_between(const Direction& a, const Direction& b) {
    return std::acos(std::clamp(dot(a, b), -1.0, 1.0));
}

Direction rotate_y(const Direction& d, double degrees) {
    const double rad = degrees * kPi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    // Renormalize so repeated rotation does not drift off the unit sphere.
    return Direction::normalized({c * d.x() + s * d.z(), d.y(), -s * d.x() + c * d.z()});
}

void LightingCondition::validate() const {
    for (std::size_t i = 0; i < lights.size(); ++i) {
        if (!lights[i].intensity.nonnegative()) {
            throw InvalidArgument("light " + std::to_string(i) + " has a negative intensity");
        }
    }
}

LightingCondition LightingCondition::scaled(double alpha) const {
    LightingCondition out = *this;
    for (auto& l : out.lights) l.intensity = l.intensity * alpha;
    return out;
}

Rgb LightingCondition::total_intensity() const {
    Rgb sum;
    for (const auto& l : lights) sum += l.intensity;
    return sum;
}

LightingCondition combine(const LightingCondition& a, const LightingCondition& b) {
    LightingCondition out = a;
    out.lights.insert(out.lights.end(), b.lights.begin(), b.lights.end());
    return out;
}

SphereLayout SphereLayout::make_default(std::size_t count) {
    return SphereLayout{fibonacci_hemisphere(count)};
}

std::size_t SphereLayout::nearest(const Direction& d) const {
    if (directions.empty()) throw InvalidArgument("empty sphere layout");
    std::size_t best = 0;
    double best_dot = -2.0;
    for (std::size_t i = 0; i < directions.size(); ++i) {
        const double c = dot(directions[i], d);
        if (c > best_dot) {
            best_dot = c;
            best = i;
        }
    }
    return best;
}

LatLong dir_to_latlong(const Direction& d) {
    double u = std::atan2(d.x(), d.z()) / (2.0 * kPi) + 0.5;
    if (u >= 1.0) u -= 1.0;
    const double v = std::acos(std::clamp(d.y(), -1.0, 1.0)) / kPi;
    return {u, v};
}

Direction latlong_to_dir(double u, double v) {
    const double phi = (u - 0.5) * 2.0 * kPi;
    const double theta = v * kPi;
    const double s = std::sin(theta);
    return Direction::normalized({s * std::sin(phi), std::cos(theta), s * std::cos(phi)});
}

std::vector<Direction> fibonacci_hemisphere(std::size_t count) {
    if (count == 0) throw InvalidArgument("fibonacci_hemisphere needs at least one direction");
    if (count == 1) return {Direction(0.0, 1.0, 0.0)};

    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Direction> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        // Equal-area bands in y over (0, 1].
        const double y = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(count);
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden_angle * static_cast<double>(i);
        out.push_back(Direction::normalized({r * std::cos(phi), y, r * std::sin(phi)}));
    }
    return out;
}

double srgb_to_linear(double c) {
    if (c < 0.0) throw InvalidArgument("srgb_to_linear: negative input");
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
    if (c < 0.0) throw InvalidArgument("linear_to_srgb: negative input");
    return c <= 0.0031308 ? c * 12.92 : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double solid_angle_weight(std::size_t row, std::size_t width, std::size_t height) {
    if (row >= height || width == 0) throw InvalidArgument("solid_angle_weight: row out of range");
    const double h = static_cast<double>(height);
    const double theta = kPi * (static_cast<double>(row) + 0.5) / h;
    return std::sin(theta) * (2.0 * kPi / static_cast<double>(width)) * (kPi / h);
}

}  // namespace relux
