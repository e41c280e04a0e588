#pragma once

// Light-sphere geometry and color transfer shared across the toolkit.
//
// Camera space is x right, y up, z toward the camera. Equirectangular
// coordinates measure u around the y axis (u = 0.5 looks down +z) and
// v from the zenith (v = 0 is +y), so the upper hemisphere fills the
// top half of a lat-long map.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

namespace relux {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr bool operator==(const Vec3&) const = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

/// Unit-length 3-vector. Construction validates the norm to 1e-6.
class Direction {
public:
    Direction() = default;  // zenith
    explicit Direction(const Vec3& v);
    Direction(double x, double y, double z) : Direction(Vec3{x, y, z}) {}

    /// Normalizes `v`; throws InvalidArgument when `v` is (near) zero.
    static Direction normalized(const Vec3& v);

    double x() const { return v_.x; }
    double y() const { return v_.y; }
    double z() const { return v_.z; }
    const Vec3& vec() const { return v_; }

    bool operator==(const Direction&) const = default;

private:
    Vec3 v_{0.0, 1.0, 0.0};
};

inline double dot(const Direction& a, const Direction& b) { return dot(a.vec(), b.vec()); }

/// Angle between two directions in radians.
double angle_between(const Direction& a, const Direction& b);

/// Rotation of `d` about +y by `degrees` (right-handed).
Direction rotate_y(const Direction& d, double degrees);

/// Linear RGB triple.
struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    constexpr Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
    constexpr Rgb operator-(const Rgb& o) const { return {r - o.r, g - o.g, b - o.b}; }
    constexpr Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
    constexpr Rgb operator*(const Rgb& o) const { return {r * o.r, g * o.g, b * o.b}; }
    constexpr Rgb& operator+=(const Rgb& o) {
        r += o.r;
        g += o.g;
        b += o.b;
        return *this;
    }
    constexpr bool operator==(const Rgb&) const = default;

    double operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }
    double l2() const { return std::sqrt(r * r + g * g + b * b); }
    /// Rec. 709 relative luminance.
    double luminance() const { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }
    bool nonnegative() const { return r >= 0.0 && g >= 0.0 && b >= 0.0; }
};

struct LightSource {
    Direction direction;
    Rgb intensity;
};

/// An unordered set of lights, stored as a list.
struct LightingCondition {
    std::vector<LightSource> lights;

    bool empty() const { return lights.empty(); }
    std::size_t size() const { return lights.size(); }

    /// Throws InvalidArgument if any intensity component is negative.
    void validate() const;

    LightingCondition scaled(double alpha) const;
    Rgb total_intensity() const;
};

/// Union of two light lists; the irradiance of the result is the sum.
LightingCondition combine(const LightingCondition& a, const LightingCondition& b);

/// Directions of every physical light on the stage.
struct SphereLayout {
    std::vector<Direction> directions;

    std::size_t size() const { return directions.size(); }
    bool empty() const { return directions.empty(); }

    static constexpr std::size_t kDefaultCount = 1600;
    /// Upper-hemisphere Fibonacci layout with `count` lights.
    static SphereLayout make_default(std::size_t count = kDefaultCount);

    /// Index of the direction with the largest dot product with `d`; ties go to the lower index.
    std::size_t nearest(const Direction& d) const;
};

struct LatLong {
    double u = 0.0;
    double v = 0.0;
};

LatLong dir_to_latlong(const Direction& d);
Direction latlong_to_dir(double u, double v);
inline Direction latlong_to_dir(const LatLong& uv) { return latlong_to_dir(uv.u, uv.v); }

/// K directions spread evenly over the y >= 0 hemisphere. K = 1 yields the zenith.
std::vector<Direction> fibonacci_hemisphere(std::size_t count);

/// sRGB transfer functions; both reject negative input.
double srgb_to_linear(double c);
double linear_to_srgb(double c);

/// Solid angle of one pixel in row `row` of a width x height equirect map.
double solid_angle_weight(std::size_t row, std::size_t width, std::size_t height);

}  // namespace relux
