#pragma once

// One light as one token: lights are pooled onto K hemisphere anchors, each pooled
// light is encoded as Fourier features of its direction concatenated with several
// gamma curves of its intensity, then lifted to the model width by a small MLP.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "relux/geometry.hpp"

namespace relux::token {

struct AggregatedLight {
    Rgb intensity;
    Direction direction;
    std::size_t anchor = 0;
};

/// Pools each source onto its nearest anchor. Anchors that receive no source are omitted.
/// I_j is the intensity sum; D_j the intensity-norm weighted mean direction, or the anchor itself when the
/// bin is black. Within a bin sources are summed in a canonical (direction, intensity) order, so the result
/// does not depend on the order of `lighting`.
std::vector<AggregatedLight> aggregate(const LightingCondition& lighting, std::span<const Direction> anchors);

/// [D, sin(2^0 pi D), cos(2^0 pi D), ..., sin(2^(F-1) pi D), cos(2^(F-1) pi D)]; size 3 + 6F.
std::vector<double> encode_direction(const Direction& d, int octaves);

/// G exponents log-spaced from 1/3 to 3 (G = 1 gives {1}).
std::vector<double> default_gammas(int count = 7);

/// For each gamma, (I / exposure_ref)^gamma per channel; size 3G.
std::vector<double> encode_intensity(const Rgb& intensity, std::span<const double> gammas, double exposure_ref);

/// Mean light luminance, floored at 1e-6.
double mean_luminance(const LightingCondition& lighting);

struct TokenConfig {
    std::size_t anchors = 128;
    int octaves = 4;
    std::vector<double> gammas = default_gammas();
    /// Intensity normalizer. When `auto_exposure` is set, mean_luminance of each condition is used instead.
    double exposure_ref = 1.0;
    bool auto_exposure = false;

    std::size_t raw_dim() const { return 3 + 6 * static_cast<std::size_t>(octaves) + 3 * gammas.size(); }
    std::size_t direction_dim() const { return 3 + 6 * static_cast<std::size_t>(octaves); }
};

struct RawToken {
    std::vector<double> features;
    std::size_t anchor = 0;
};

/// Aggregate then encode; zero-flux bins are dropped.
std::vector<RawToken> raw_tokens(const LightingCondition& lighting, const TokenConfig& config);
std::vector<RawToken> raw_tokens(const LightingCondition& lighting, const TokenConfig& config,
                                 std::span<const Direction> anchors);

/// Raw tokens of several frames stacked row-wise, with the frame index of each row.
struct TokenBatch {
    Eigen::MatrixXd features;
    std::vector<int> frames;
};
TokenBatch raw_token_batch(std::span<const LightingCondition> per_frame, const TokenConfig& config);

/// Two affine layers with a GELU between; hidden width equals output width.
struct TokenProjector {
    Eigen::MatrixXd w1;  // raw_dim x width
    Eigen::RowVectorXd b1;
    Eigen::MatrixXd w2;  // width x width
    Eigen::RowVectorXd b2;

    static TokenProjector init(std::size_t raw_dim, std::size_t width, std::uint64_t seed);
    std::size_t output_dim() const { return static_cast<std::size_t>(w2.cols()); }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& raw) const;
};

struct ProjectedToken {
    Eigen::RowVectorXd value;
    std::size_t anchor = 0;
};

/// aggregate -> encode -> project over fibonacci_hemisphere(config.anchors).
std::vector<ProjectedToken> tokenize(const LightingCondition& lighting, const TokenConfig& config,
                                     const TokenProjector& projector);

/// tanh-approximated GELU and its derivative, shared with the trainer.
double gelu(double x);
double gelu_grad(double x);

}  // namespace relux::token
