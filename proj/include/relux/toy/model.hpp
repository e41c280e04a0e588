#pragma once

// Tiny conditioned denoiser in pixel space.
//
// The noisy video and the input video are concatenated along channels, cut into
// patches and embedded. Each block runs self-attention over all video tokens, then
// cross-attention from video tokens to the light tokens of the same frame, then a
// feed-forward layer. The head predicts the clean video h, and the noise estimate
// is eps_hat = (z_t - (1 - t) h) / t, so the clean-video reconstruction
// (z_t - t eps_hat) / (1 - t) equals h for every t in (0, 1].

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relux/attention.hpp"
#include "relux/olatoken.hpp"

namespace relux::toy {

using attn::Latent;
using attn::Matrix;

struct ToyConfig {
    int width = 32;
    int blocks = 2;
    int heads = 2;
    int ffn_hidden = 64;
    int patch = 2;
    int channels = 3;
    /// Full frame size in patches; the positional table has one row per patch.
    int grid_height = 8;
    int grid_width = 8;
    int time_features = 8;
    token::TokenConfig tokens;

    int patch_dim() const { return patch * patch * channels; }
    int input_dim() const { return 2 * patch_dim(); }

    nlohmann::json to_json() const;
    static ToyConfig from_json(const nlohmann::json& j);
};

struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
};

/// One conditioning example: the input video plus raw light tokens of the target lighting.
struct ToyInput {
    Latent condition;
    token::TokenBatch lights;
    /// Crop origin inside the full frame, in patches.
    int patch_y = 0;
    int patch_x = 0;
};

struct LayerNormCache {
    Matrix xhat;
    Eigen::VectorXd rstd;
};

struct BlockTrace {
    Matrix x_in;
    LayerNormCache ln1;
    Matrix a, q, k, v, self_out;
    attn::AttentionCache self_cache;
    Matrix x_mid;
    LayerNormCache ln2;
    Matrix c, cq, ck, cv, cross_out;
    attn::AttentionCache cross_cache;
    Matrix x_cross;
    LayerNormCache ln3;
    Matrix f, pre, hidden;
};

/// Intermediate values of one forward pass, kept for the backward pass.
struct ForwardTrace {
    Matrix patches;
    std::vector<int> pos_index;
    std::vector<int> token_frames;
    Matrix time_features;
    Matrix raw, proj_pre, proj_hidden, light_tokens;
    std::vector<BlockTrace> blocks;
    Matrix x_final;
    LayerNormCache ln_out;
    Matrix y;

    /// Attention output of the cross-attention in `block` (before its output projection).
    const Matrix& cross_attention_output(std::size_t block = 0) const { return blocks.at(block).cross_out; }
};

/// Non-finite loss or gradient during training. Carries the parameters of the last finite step.
class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(const std::string& what, int step, std::vector<Matrix> checkpoint)
        : std::runtime_error(what), step_(step), checkpoint_(std::move(checkpoint)) {}
    int step() const noexcept { return step_; }
    const std::vector<Matrix>& checkpoint() const noexcept { return checkpoint_; }

private:
    int step_;
    std::vector<Matrix> checkpoint_;
};

/// z_t = (1 - t) z0 + t eps.
Latent flow_forward(const Latent& z0, const Latent& eps, double t);

class ToyModel {
public:
    ToyModel() = default;
    ToyModel(const ToyConfig& config, std::uint64_t seed);

    const ToyConfig& config() const { return config_; }
    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }
    std::size_t parameter_count() const;
    /// Index of a parameter by name; throws InvalidArgument when absent.
    std::size_t find(const std::string& name) const;

    void zero_grad();

    /// Clean-video estimate h for the noisy video z_t at time t in (0, 1].
    Latent predict_clean(const ToyInput& input, const Latent& z_t, double t, ForwardTrace* trace = nullptr) const;
    /// eps_hat = (z_t - (1 - t) h) / t.
    Latent predict_noise(const ToyInput& input, const Latent& z_t, double t) const;

    /// Mean squared error between eps_hat and eps at z_t = flow_forward(z0, eps, t).
    /// Gradients are accumulated into Param::grad (call zero_grad first for a fresh gradient).
    double loss_and_grads(const ToyInput& input, const Latent& z0, const Latent& eps, double t);
    /// Loss only.
    double loss(const ToyInput& input, const Latent& z0, const Latent& eps, double t) const;

    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix>& values);

    void save(const std::string& path) const;
    static ToyModel load(const std::string& path);

private:
    Matrix& w(std::size_t i) { return params_[i].value; }
    const Matrix& w(std::size_t i) const { return params_[i].value; }
    Matrix& g(std::size_t i) { return params_[i].grad; }
    std::size_t add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    void build_layout();
    void backward(const ForwardTrace& trace, const Matrix& d_y);

    struct BlockIds {
        std::size_t ln1_g, ln1_b, wq, wk, wv, wo, bo;
        std::size_t ln2_g, ln2_b, cwq, cwk, cwv, cwo, cbo;
        std::size_t ln3_g, ln3_b, f_w1, f_b1, f_w2, f_b2;
    };
    struct Ids {
        std::size_t in_w, in_b, pos, time_w, time_b;
        std::size_t p_w1, p_b1, p_w2, p_b2;
        std::vector<BlockIds> blocks;
        std::size_t out_g, out_b, out_w, out_bias;
    };

    ToyConfig config_;
    std::vector<Param> params_;
    Ids ids_{};
};

/// Relative error |a - n| / max(|a|, |n|, floor) between analytic and central-difference gradients.
struct GradientCheck {
    std::string param;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double relative_error = 0.0;
};

/// Samples `coordinates` parameter entries spread over every parameter group and compares gradients.
std::vector<GradientCheck> check_gradients(ToyModel& model, const ToyInput& input, const Latent& z0,
                                           const Latent& eps, double t, int coordinates, std::uint64_t seed,
                                           double step = 1e-4, double floor = 1e-6);

}  // namespace relux::toy
