#pragma once

// Scaled dot-product attention with frame-wise masking.
//
// Queries (video tokens) and keys (light tokens) each carry a frame index. With a
// frame mask a query only sees keys from its own frame. Two evaluation routes are
// provided: a dense route that adds a large negative bias to forbidden scores, and a
// frame-batched route that runs one small attention per frame and never builds the
// mask. Both agree to rounding.

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace relux::attn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rows are tokens. `frames` holds one frame index per row (may be empty when unused).
struct TokenMatrix {
    Matrix values;
    std::vector<int> frames;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

/// Query q may attend key k iff frame(q) == frame(k).
struct FrameMask {
    int sequence_length = 1;

    bool permits(int query_frame, int key_frame) const { return query_frame == key_frame; }
    /// Dense additive bias: 0 where permitted, kForbiddenBias elsewhere.
    Matrix bias(const std::vector<int>& query_frames, const std::vector<int>& key_frames) const;
};

inline constexpr double kForbiddenBias = -1e9;

struct AttentionOptions {
    int heads = 1;
};

/// softmax(Q K^T / sqrt(d) + bias) V, per head. Throws MissingLightingForFrame when a query row has no permitted key.
TokenMatrix cross_attention(const TokenMatrix& queries, const TokenMatrix& keys, const TokenMatrix& values,
                            const std::optional<FrameMask>& mask, const AttentionOptions& options = {});

/// Same result as masked cross_attention, computed one frame at a time.
TokenMatrix frame_batched_attention(const TokenMatrix& queries, const TokenMatrix& keys, const TokenMatrix& values,
                                    int sequence_length, const AttentionOptions& options = {});

/// A block of queries that attends to a block of keys.
struct Group {
    std::vector<int> queries;
    std::vector<int> keys;
};

/// One group holding every query and key.
std::vector<Group> full_groups(Eigen::Index n_queries, Eigen::Index n_keys);
/// One group per frame in [0, T). Throws MissingLightingForFrame for a query frame without keys.
std::vector<Group> frame_groups(const std::vector<int>& query_frames, const std::vector<int>& key_frames,
                                int sequence_length);

/// Softmax probabilities kept for the backward pass, indexed [group][head].
struct AttentionCache {
    std::vector<Group> groups;
    int heads = 1;
    std::vector<std::vector<Matrix>> probs;
};

/// Grouped attention. Fills `cache` when non-null.
Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<Group>& groups, int heads,
              AttentionCache* cache = nullptr);

/// Accumulates dQ, dK, dV (+=) for upstream gradient dOut. Buffers must be pre-sized.
void attend_backward(const AttentionCache& cache, const Matrix& q, const Matrix& k, const Matrix& v,
                     const Matrix& d_out, Matrix& d_q, Matrix& d_k, Matrix& d_v);

/// Video-shaped tensor (frames, height, width, channels), channel fastest.
struct Latent {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    static Latent zeros(int t, int h, int w, int c);
    double& at(int t, int y, int x, int c) { return data[index(t, y, x, c)]; }
    double at(int t, int y, int x, int c) const { return data[index(t, y, x, c)]; }
    bool same_shape(const Latent& o) const {
        return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
    }
    std::size_t index(int t, int y, int x, int c) const {
        return ((static_cast<std::size_t>(t) * height + y) * width + x) * channels + c;
    }
};

/// Channel concatenation in the order (noisy, condition).
Latent concat_condition(const Latent& noisy, const Latent& condition);
/// Inverse of concat_condition.
std::pair<Latent, Latent> split_condition(const Latent& stacked);

}  // namespace relux::attn
