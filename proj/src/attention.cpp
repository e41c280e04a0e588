#include "relux/attention.hpp"

#include <cmath>
#include <string>

#include "relux/error.hpp"

namespace relux::attn {

namespace {

void check_shapes(const TokenMatrix& q, const TokenMatrix& k, const TokenMatrix& v, int heads) {
    if (k.rows() != v.rows()) throw InvalidArgument("key and value row counts differ");
    if (q.cols() != k.cols()) throw InvalidArgument("query and key widths differ");
    if (heads < 1 || q.cols() % heads != 0 || v.cols() % heads != 0)
        throw InvalidArgument("channel widths must divide evenly into heads");
    for (double x : q.values.reshaped()) {
        if (!std::isfinite(x)) throw InvalidArgument("non-finite query entry");
    }
    for (double x : k.values.reshaped()) {
        if (!std::isfinite(x)) throw InvalidArgument("non-finite key entry");
    }
}

void softmax_rows(Matrix& s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        auto row = s.row(r);
        const double m = row.maxCoeff();
        row = (row.array() - m).exp();
        row /= row.sum();
    }
}

}  // namespace

Matrix FrameMask::bias(const std::vector<int>& query_frames, const std::vector<int>& key_frames) const {
    Matrix b(static_cast<Eigen::Index>(query_frames.size()), static_cast<Eigen::Index>(key_frames.size()));
    for (std::size_t i = 0; i < query_frames.size(); ++i)
        for (std::size_t j = 0; j < key_frames.size(); ++j)
            b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                permits(query_frames[i], key_frames[j]) ? 0.0 : kForbiddenBias;
    return b;
}

TokenMatrix cross_attention(const TokenMatrix& queries, const TokenMatrix& keys, const TokenMatrix& values,
                            const std::optional<FrameMask>& mask, const AttentionOptions& options) {
    check_shapes(queries, keys, values, options.heads);
    Matrix bias;
    if (mask) {
        if (queries.frames.size() != static_cast<std::size_t>(queries.rows()) ||
            keys.frames.size() != static_cast<std::size_t>(keys.rows()))
            throw InvalidArgument("masked attention needs a frame index per token");
        bias = mask->bias(queries.frames, keys.frames);
        for (Eigen::Index r = 0; r < bias.rows(); ++r) {
            if (bias.cols() == 0 || bias.row(r).maxCoeff() != 0.0)
                throw MissingLightingForFrame(queries.frames[static_cast<std::size_t>(r)]);
        }
    } else if (keys.rows() == 0) {
        throw MissingLightingForFrame(queries.frames.empty() ? 0 : queries.frames.front());
    }

    const int h = options.heads;
    const Eigen::Index dq = queries.cols() / h;
    const Eigen::Index dv = values.cols() / h;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dq));

    TokenMatrix out;
    out.values.resize(queries.rows(), values.cols());
    out.frames = queries.frames;
    for (int head = 0; head < h; ++head) {
        Matrix s = queries.values.middleCols(head * dq, dq) * keys.values.middleCols(head * dq, dq).transpose() * scale;
        if (mask) s += bias;
        softmax_rows(s);
        out.values.middleCols(head * dv, dv) = s * values.values.middleCols(head * dv, dv);
    }
    return out;
}

std::vector<Group> full_groups(Eigen::Index n_queries, Eigen::Index n_keys) {
    Group g;
    g.queries.resize(static_cast<std::size_t>(n_queries));
    g.keys.resize(static_cast<std::size_t>(n_keys));
    for (Eigen::Index i = 0; i < n_queries; ++i) g.queries[static_cast<std::size_t>(i)] = static_cast<int>(i);
    for (Eigen::Index i = 0; i < n_keys; ++i) g.keys[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return {std::move(g)};
}

std::vector<Group> frame_groups(const std::vector<int>& query_frames, const std::vector<int>& key_frames,
                                int sequence_length) {
    if (sequence_length < 1) throw InvalidArgument("sequence length must be positive");
    std::vector<Group> groups(static_cast<std::size_t>(sequence_length));
    auto slot = [&](int f) -> Group& {
        if (f < 0 || f >= sequence_length)
            throw InvalidArgument("frame index " + std::to_string(f) + " outside the sequence");
        return groups[static_cast<std::size_t>(f)];
    };
    for (std::size_t i = 0; i < query_frames.size(); ++i) slot(query_frames[i]).queries.push_back(static_cast<int>(i));
    for (std::size_t i = 0; i < key_frames.size(); ++i) slot(key_frames[i]).keys.push_back(static_cast<int>(i));

    std::vector<Group> out;
    for (int f = 0; f < sequence_length; ++f) {
        auto& g = groups[static_cast<std::size_t>(f)];
        if (g.queries.empty()) continue;
        if (g.keys.empty()) throw MissingLightingForFrame(f);
        out.push_back(std::move(g));
    }
    return out;
}

Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<Group>& groups, int heads,
              AttentionCache* cache) {
    if (heads < 1 || q.cols() % heads != 0 || v.cols() % heads != 0 || q.cols() != k.cols())
        throw InvalidArgument("attention widths do not split into heads");
    const Eigen::Index dq = q.cols() / heads;
    const Eigen::Index dv = v.cols() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dq));

    Matrix out = Matrix::Zero(q.rows(), v.cols());
    if (cache) {
        cache->groups = groups;
        cache->heads = heads;
        cache->probs.assign(groups.size(), std::vector<Matrix>(static_cast<std::size_t>(heads)));
    }
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const Matrix qg = q(g.queries, Eigen::all);
        const Matrix kg = k(g.keys, Eigen::all);
        const Matrix vg = v(g.keys, Eigen::all);
        Matrix og(qg.rows(), v.cols());
        for (int head = 0; head < heads; ++head) {
            Matrix p = qg.middleCols(head * dq, dq) * kg.middleCols(head * dq, dq).transpose() * scale;
            softmax_rows(p);
            og.middleCols(head * dv, dv) = p * vg.middleCols(head * dv, dv);
            if (cache) cache->probs[gi][static_cast<std::size_t>(head)] = std::move(p);
        }
        out(g.queries, Eigen::all) = og;
    }
    return out;
}

void attend_backward(const AttentionCache& cache, const Matrix& q, const Matrix& k, const Matrix& v,
                     const Matrix& d_out, Matrix& d_q, Matrix& d_k, Matrix& d_v) {
    const int heads = cache.heads;
    const Eigen::Index dq = q.cols() / heads;
    const Eigen::Index dv = v.cols() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dq));

    for (std::size_t gi = 0; gi < cache.groups.size(); ++gi) {
        const auto& g = cache.groups[gi];
        const Matrix qg = q(g.queries, Eigen::all);
        const Matrix kg = k(g.keys, Eigen::all);
        const Matrix vg = v(g.keys, Eigen::all);
        const Matrix dog = d_out(g.queries, Eigen::all);
        Matrix dqg = Matrix::Zero(qg.rows(), qg.cols());
        Matrix dkg = Matrix::Zero(kg.rows(), kg.cols());
        Matrix dvg = Matrix::Zero(vg.rows(), vg.cols());
        for (int head = 0; head < heads; ++head) {
            const Matrix& p = cache.probs[gi][static_cast<std::size_t>(head)];
            const auto doh = dog.middleCols(head * dv, dv);
            dvg.middleCols(head * dv, dv) = p.transpose() * doh;
            const Matrix dp = doh * vg.middleCols(head * dv, dv).transpose();
            // Softmax Jacobian: dS = P * (dP - rowsum(dP * P)).
            const Eigen::VectorXd inner = (dp.array() * p.array()).rowwise().sum();
            const Matrix ds = (p.array() * (dp.array().colwise() - inner.array())).matrix() * scale;
            dqg.middleCols(head * dq, dq) = ds * kg.middleCols(head * dq, dq);
            dkg.middleCols(head * dq, dq) = ds.transpose() * qg.middleCols(head * dq, dq);
        }
        d_q(g.queries, Eigen::all) += dqg;
        d_k(g.keys, Eigen::all) += dkg;
        d_v(g.keys, Eigen::all) += dvg;
    }
}

TokenMatrix frame_batched_attention(const TokenMatrix& queries, const TokenMatrix& keys, const TokenMatrix& values,
                                    int sequence_length, const AttentionOptions& options) {
    check_shapes(queries, keys, values, options.heads);
    if (queries.frames.size() != static_cast<std::size_t>(queries.rows()) ||
        keys.frames.size() != static_cast<std::size_t>(keys.rows()))
        throw InvalidArgument("frame-batched attention needs a frame index per token");
    const auto groups = frame_groups(queries.frames, keys.frames, sequence_length);
    TokenMatrix out;
    out.values = attend(queries.values, keys.values, values.values, groups, options.heads);
    out.frames = queries.frames;
    return out;
}

Latent Latent::zeros(int t, int h, int w, int c) {
    if (t < 0 || h < 0 || w < 0 || c < 0) throw InvalidArgument("negative latent extent");
    Latent l{t, h, w, c, {}};
    l.data.assign(static_cast<std::size_t>(t) * h * w * c, 0.0);
    return l;
}

Latent concat_condition(const Latent& noisy, const Latent& condition) {
    if (!noisy.same_shape(condition)) throw InvalidArgument("concat_condition: shape mismatch");
    Latent out = Latent::zeros(noisy.frames, noisy.height, noisy.width, 2 * noisy.channels);
    const std::size_t sites = static_cast<std::size_t>(noisy.frames) * noisy.height * noisy.width;
    const auto c = static_cast<std::size_t>(noisy.channels);
    for (std::size_t s = 0; s < sites; ++s) {
        for (std::size_t i = 0; i < c; ++i) {
            out.data[s * 2 * c + i] = noisy.data[s * c + i];
            out.data[s * 2 * c + c + i] = condition.data[s * c + i];
        }
    }
    return out;
}

std::pair<Latent, Latent> split_condition(const Latent& stacked) {
    if (stacked.channels % 2 != 0) throw InvalidArgument("split_condition: odd channel count");
    const int c = stacked.channels / 2;
    auto a = Latent::zeros(stacked.frames, stacked.height, stacked.width, c);
    auto b = a;
    const std::size_t sites = static_cast<std::size_t>(stacked.frames) * stacked.height * stacked.width;
    const auto cc = static_cast<std::size_t>(c);
    for (std::size_t s = 0; s < sites; ++s) {
        for (std::size_t i = 0; i < cc; ++i) {
            a.data[s * cc + i] = stacked.data[s * 2 * cc + i];
            b.data[s * cc + i] = stacked.data[s * 2 * cc + cc + i];
        }
    }
    return {std::move(a), std::move(b)};
}

}  // namespace relux::attn
