#include "relux/olatoken.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "relux/error.hpp"

namespace relux::token {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t nearest_anchor(const Direction& d, std::span<const Direction> anchors) {
    std::size_t best = 0;
    double best_dot = -2.0;
    for (std::size_t j = 0; j < anchors.size(); ++j) {
        const double c = dot(anchors[j], d);
        if (c > best_dot) {
            best_dot = c;
            best = j;
        }
    }
    return best;
}

auto canonical_key(const LightSource& l) {
    return std::make_tuple(l.direction.x(), l.direction.y(), l.direction.z(), l.intensity.r, l.intensity.g,
                           l.intensity.b);
}

}  // namespace

std::vector<AggregatedLight> aggregate(const LightingCondition& lighting, std::span<const Direction> anchors) {
    if (lighting.empty()) throw InvalidArgument("aggregate: empty lighting condition");
    if (anchors.empty()) throw InvalidArgument("aggregate: no anchors");
    lighting.validate();

    std::vector<std::vector<const LightSource*>> bins(anchors.size());
    for (const auto& l : lighting.lights) bins[nearest_anchor(l.direction, anchors)].push_back(&l);

    std::vector<AggregatedLight> out;
    for (std::size_t j = 0; j < bins.size(); ++j) {
        auto& bin = bins[j];
        if (bin.empty()) continue;
        std::sort(bin.begin(), bin.end(),
                  [](const LightSource* a, const LightSource* b) { return canonical_key(*a) < canonical_key(*b); });

        Rgb intensity;
        Vec3 weighted;
        double weight = 0.0;
        for (const LightSource* l : bin) {
            intensity += l->intensity;
            const double n = l->intensity.l2();
            weighted += l->direction.vec() * n;
            weight += n;
        }
        // The division by the total weight in the mean cancels under normalization; only its zero case matters.
        Direction direction = anchors[j];
        if (weight > 0.0 && weighted.norm() > 1e-12 * weight) direction = Direction::normalized(weighted);
        out.push_back({intensity, direction, j});
    }
    return out;
}

std::vector<double> encode_direction(const Direction& d, int octaves) {
    if (octaves < 0) throw InvalidArgument("octave count must be nonnegative");
    std::vector<double> out{d.x(), d.y(), d.z()};
    out.reserve(3 + 6 * static_cast<std::size_t>(octaves));
    for (int k = 0; k < octaves; ++k) {
        const double freq = std::ldexp(kPi, k);
        for (double c : {d.x(), d.y(), d.z()}) out.push_back(std::sin(freq * c));
        for (double c : {d.x(), d.y(), d.z()}) out.push_back(std::cos(freq * c));
    }
    return out;
}

std::vector<double> default_gammas(int count) {
    if (count < 1) throw InvalidArgument("gamma count must be positive");
    if (count == 1) return {1.0};
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        out[static_cast<std::size_t>(k)] = std::pow(3.0, 2.0 * k / (count - 1) - 1.0);
    }
    out.front() = 1.0 / 3.0;
    out.back() = 3.0;
    return out;
}

std::vector<double> encode_intensity(const Rgb& intensity, std::span<const double> gammas, double exposure_ref) {
    if (!intensity.nonnegative()) throw InvalidArgument("encode_intensity: negative intensity");
    if (!(exposure_ref > 0.0)) throw InvalidArgument("encode_intensity: exposure_ref must be positive");
    std::vector<double> out;
    out.reserve(3 * gammas.size());
    for (double g : gammas) {
        for (int c = 0; c < 3; ++c) out.push_back(std::pow(intensity[c] / exposure_ref, g));
    }
    return out;
}

double mean_luminance(const LightingCondition& lighting) {
    if (lighting.empty()) return 1e-6;
    double sum = 0.0;
    for (const auto& l : lighting.lights) sum += l.intensity.luminance();
    return std::max(1e-6, sum / static_cast<double>(lighting.size()));
}

std::vector<RawToken> raw_tokens(const LightingCondition& lighting, const TokenConfig& config,
                                 std::span<const Direction> anchors) {
    const double ref = config.auto_exposure ? mean_luminance(lighting) : config.exposure_ref;
    std::vector<RawToken> out;
    for (const auto& a : aggregate(lighting, anchors)) {
        if (a.intensity.r == 0.0 && a.intensity.g == 0.0 && a.intensity.b == 0.0) continue;
        RawToken t;
        t.anchor = a.anchor;
        t.features = encode_direction(a.direction, config.octaves);
        const auto inten = encode_intensity(a.intensity, config.gammas, ref);
        t.features.insert(t.features.end(), inten.begin(), inten.end());
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<RawToken> raw_tokens(const LightingCondition& lighting, const TokenConfig& config) {
    const auto anchors = fibonacci_hemisphere(config.anchors);
    return raw_tokens(lighting, config, anchors);
}

TokenBatch raw_token_batch(std::span<const LightingCondition> per_frame, const TokenConfig& config) {
    const auto anchors = fibonacci_hemisphere(config.anchors);
    std::vector<std::vector<RawToken>> frames;
    std::size_t rows = 0;
    for (const auto& cond : per_frame) {
        frames.push_back(raw_tokens(cond, config, anchors));
        rows += frames.back().size();
    }
    TokenBatch batch;
    batch.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(config.raw_dim()));
    Eigen::Index r = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (const auto& t : frames[f]) {
            for (std::size_t c = 0; c < t.features.size(); ++c) batch.features(r, static_cast<Eigen::Index>(c)) = t.features[c];
            batch.frames.push_back(static_cast<int>(f));
            ++r;
        }
    }
    return batch;
}

double gelu(double x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
    return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
    constexpr double k = 0.7978845608028654;
    const double inner = k * (x + 0.044715 * x * x * x);
    const double t = std::tanh(inner);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * 0.044715 * x * x);
}

TokenProjector TokenProjector::init(std::size_t raw_dim, std::size_t width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Eigen::Index rows, Eigen::Index cols) {
        std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(rows)));
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
        return m;
    };
    TokenProjector p;
    const auto in = static_cast<Eigen::Index>(raw_dim);
    const auto w = static_cast<Eigen::Index>(width);
    p.w1 = fill(in, w);
    p.b1 = Eigen::RowVectorXd::Zero(w);
    p.w2 = fill(w, w);
    p.b2 = Eigen::RowVectorXd::Zero(w);
    return p;
}

Eigen::MatrixXd TokenProjector::forward(const Eigen::MatrixXd& raw) const {
    if (raw.cols() != w1.rows()) throw InvalidArgument("token projector input width mismatch");
    Eigen::MatrixXd hidden = (raw * w1).rowwise() + b1;
    hidden = hidden.unaryExpr([](double x) { return gelu(x); });
    return (hidden * w2).rowwise() + b2;
}

std::vector<ProjectedToken> tokenize(const LightingCondition& lighting, const TokenConfig& config,
                                     const TokenProjector& projector) {
    const auto raw = raw_tokens(lighting, config);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(raw.size()), static_cast<Eigen::Index>(config.raw_dim()));
    for (std::size_t i = 0; i < raw.size(); ++i)
        for (std::size_t c = 0; c < raw[i].features.size(); ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = raw[i].features[c];
    const Eigen::MatrixXd projected = projector.forward(m);
    std::vector<ProjectedToken> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i].value = projected.row(static_cast<Eigen::Index>(i));
        out[i].anchor = raw[i].anchor;
    }
    return out;
}

}  // namespace relux::token
