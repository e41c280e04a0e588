#include "relux/toy/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "relux/error.hpp"

namespace relux::toy {

namespace {

constexpr double kLnEps = 1e-5;
constexpr char kMagic[4] = {'R', 'L', 'X', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    cache.xhat.resize(n, d);
    cache.rstd.resize(n);
    Matrix y(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mu = x.row(r).mean();
        const Eigen::RowVectorXd centered = x.row(r).array() - mu;
        const double var = centered.squaredNorm() / static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        cache.rstd(r) = rstd;
        cache.xhat.row(r) = centered * rstd;
        y.row(r) = (cache.xhat.row(r).array() * gain.row(0).array() + bias.row(0).array()).matrix();
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain, Matrix& d_gain,
                           Matrix& d_bias) {
    d_gain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    d_bias.row(0) += dy.colwise().sum();
    const Eigen::Index d = dy.cols();
    Matrix dx(dy.rows(), d);
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const Eigen::RowVectorXd dxhat = (dy.row(r).array() * gain.row(0).array()).matrix();
        const double m1 = dxhat.mean();
        const double m2 = dxhat.dot(cache.xhat.row(r)) / static_cast<double>(d);
        dx.row(r) = cache.rstd(r) * (dxhat.array() - m1 - cache.xhat.row(r).array() * m2).matrix();
    }
    return dx;
}

Matrix affine(const Matrix& x, const Matrix& weight, const Matrix& bias) {
    Matrix y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
}

Matrix gelu_of(const Matrix& x) { return x.unaryExpr([](double v) { return token::gelu(v); }); }

Matrix gelu_backward(const Matrix& dy, const Matrix& pre) {
    return dy.cwiseProduct(pre.unaryExpr([](double v) { return token::gelu_grad(v); }));
}

void check_finite_time(double t) {
    if (!(t > 0.0) || t > 1.0) throw InvalidArgument("diffusion time must lie in (0, 1]");
}

void write_raw(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::ifstream& in, void* p, std::size_t n, std::size_t& offset) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("model file truncated", offset);
    offset += n;
}

}  // namespace

nlohmann::json ToyConfig::to_json() const {
    return {{"width", width},
            {"blocks", blocks},
            {"heads", heads},
            {"ffn_hidden", ffn_hidden},
            {"patch", patch},
            {"channels", channels},
            {"grid_height", grid_height},
            {"grid_width", grid_width},
            {"time_features", time_features},
            {"anchors", tokens.anchors},
            {"octaves", tokens.octaves},
            {"gammas", tokens.gammas},
            {"exposure_ref", tokens.exposure_ref},
            {"auto_exposure", tokens.auto_exposure}};
}

ToyConfig ToyConfig::from_json(const nlohmann::json& j) {
    ToyConfig c;
    c.width = j.value("width", c.width);
    c.blocks = j.value("blocks", c.blocks);
    c.heads = j.value("heads", c.heads);
    c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
    c.patch = j.value("patch", c.patch);
    c.channels = j.value("channels", c.channels);
    c.grid_height = j.value("grid_height", c.grid_height);
    c.grid_width = j.value("grid_width", c.grid_width);
    c.time_features = j.value("time_features", c.time_features);
    c.tokens.anchors = j.value("anchors", c.tokens.anchors);
    c.tokens.octaves = j.value("octaves", c.tokens.octaves);
    if (j.contains("gammas")) c.tokens.gammas = j.at("gammas").get<std::vector<double>>();
    c.tokens.exposure_ref = j.value("exposure_ref", c.tokens.exposure_ref);
    c.tokens.auto_exposure = j.value("auto_exposure", c.tokens.auto_exposure);
    if (c.width < 1 || c.blocks < 1 || c.heads < 1 || c.width % c.heads != 0 || c.ffn_hidden < 1 || c.patch < 1 ||
        c.channels < 1 || c.grid_height < 1 || c.grid_width < 1 || c.time_features < 2 || c.time_features % 2 != 0)
        throw InvalidArgument("invalid toy model configuration");
    return c;
}

Latent flow_forward(const Latent& z0, const Latent& eps, double t) {
    if (!z0.same_shape(eps)) throw InvalidArgument("clean and noise latents differ in shape");
    if (!(t >= 0.0) || t > 1.0) throw InvalidArgument("diffusion time must lie in [0, 1]");
    Latent z = z0;
    for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] = (1.0 - t) * z0.data[i] + t * eps.data[i];
    return z;
}

std::size_t ToyModel::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    params_.push_back({name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
    return params_.size() - 1;
}

void ToyModel::build_layout() {
    const ToyConfig& c = config_;
    const Eigen::Index d = c.width;
    params_.clear();
    ids_.in_w = add("embed.w", c.input_dim(), d);
    ids_.in_b = add("embed.b", 1, d);
    ids_.pos = add("embed.pos", static_cast<Eigen::Index>(c.grid_height) * c.grid_width, d);
    ids_.time_w = add("time.w", c.time_features, d);
    ids_.time_b = add("time.b", 1, d);
    const auto raw = static_cast<Eigen::Index>(c.tokens.raw_dim());
    ids_.p_w1 = add("light.w1", raw, d);
    ids_.p_b1 = add("light.b1", 1, d);
    ids_.p_w2 = add("light.w2", d, d);
    ids_.p_b2 = add("light.b2", 1, d);
    ids_.blocks.clear();
    for (int b = 0; b < c.blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        BlockIds ids{};
        ids.ln1_g = add(p + "ln1.g", 1, d);
        ids.ln1_b = add(p + "ln1.b", 1, d);
        ids.wq = add(p + "self.wq", d, d);
        ids.wk = add(p + "self.wk", d, d);
        ids.wv = add(p + "self.wv", d, d);
        ids.wo = add(p + "self.wo", d, d);
        ids.bo = add(p + "self.bo", 1, d);
        ids.ln2_g = add(p + "ln2.g", 1, d);
        ids.ln2_b = add(p + "ln2.b", 1, d);
        ids.cwq = add(p + "cross.wq", d, d);
        ids.cwk = add(p + "cross.wk", d, d);
        ids.cwv = add(p + "cross.wv", d, d);
        ids.cwo = add(p + "cross.wo", d, d);
        ids.cbo = add(p + "cross.bo", 1, d);
        ids.ln3_g = add(p + "ln3.g", 1, d);
        ids.ln3_b = add(p + "ln3.b", 1, d);
        ids.f_w1 = add(p + "ffn.w1", d, c.ffn_hidden);
        ids.f_b1 = add(p + "ffn.b1", 1, c.ffn_hidden);
        ids.f_w2 = add(p + "ffn.w2", c.ffn_hidden, d);
        ids.f_b2 = add(p + "ffn.b2", 1, d);
        ids_.blocks.push_back(ids);
    }
    ids_.out_g = add("head.ln.g", 1, d);
    ids_.out_b = add("head.ln.b", 1, d);
    ids_.out_w = add("head.w", d, c.patch_dim());
    ids_.out_bias = add("head.b", 1, c.patch_dim());
}

ToyModel::ToyModel(const ToyConfig& config, std::uint64_t seed) : config_(config) {
    ToyConfig::from_json(config_.to_json());  // validates
    build_layout();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](std::size_t id, double stddev) {
        Matrix& m = w(id);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal(rng);
    };
    auto fan_in = [&](std::size_t id, double gain = 1.0) {
        fill(id, gain / std::sqrt(static_cast<double>(w(id).rows())));
    };
    fan_in(ids_.in_w);
    fill(ids_.pos, 0.5);
    fan_in(ids_.time_w);
    fan_in(ids_.p_w1);
    fan_in(ids_.p_w2);
    const double residual_gain = 1.0 / std::sqrt(2.0 * config_.blocks);
    for (const auto& b : ids_.blocks) {
        w(b.ln1_g).setOnes();
        w(b.ln2_g).setOnes();
        w(b.ln3_g).setOnes();
        fan_in(b.wq);
        fan_in(b.wk);
        fan_in(b.wv);
        fan_in(b.wo, residual_gain);
        fan_in(b.cwq);
        fan_in(b.cwk);
        fan_in(b.cwv);
        fan_in(b.cwo, residual_gain);
        fan_in(b.f_w1);
        fan_in(b.f_w2, residual_gain);
    }
    w(ids_.out_g).setOnes();
    fan_in(ids_.out_w, 0.1);
}

std::size_t ToyModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

std::size_t ToyModel::find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw InvalidArgument("no parameter named " + name);
}

void ToyModel::zero_grad() {
    for (auto& p : params_) p.grad.setZero();
}

Latent ToyModel::predict_clean(const ToyInput& input, const Latent& z_t, double t, ForwardTrace* trace) const {
    check_finite_time(t);
    const ToyConfig& c = config_;
    const Latent& cond = input.condition;
    if (!z_t.same_shape(cond)) throw InvalidArgument("noisy latent and condition differ in shape");
    if (cond.channels != c.channels) throw InvalidArgument("latent channel count differs from the model");
    if (cond.height % c.patch != 0 || cond.width % c.patch != 0)
        throw InvalidArgument("latent size is not a multiple of the patch size");
    const int ph = cond.height / c.patch;
    const int pw = cond.width / c.patch;
    if (input.patch_y < 0 || input.patch_x < 0 || input.patch_y + ph > c.grid_height ||
        input.patch_x + pw > c.grid_width)
        throw InvalidArgument("crop lies outside the positional grid");
    if (input.lights.features.cols() != static_cast<Eigen::Index>(c.tokens.raw_dim()))
        throw InvalidArgument("light token width differs from the model");

    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    const Latent stacked = attn::concat_condition(z_t, cond);
    const int T = cond.frames;
    const auto n_tokens = static_cast<Eigen::Index>(T) * ph * pw;
    tr.patches.resize(n_tokens, c.input_dim());
    tr.pos_index.assign(static_cast<std::size_t>(n_tokens), 0);
    tr.token_frames.assign(static_cast<std::size_t>(n_tokens), 0);
    Eigen::Index n = 0;
    for (int f = 0; f < T; ++f) {
        for (int py = 0; py < ph; ++py) {
            for (int px = 0; px < pw; ++px, ++n) {
                Eigen::Index col = 0;
                for (int dy = 0; dy < c.patch; ++dy)
                    for (int dx = 0; dx < c.patch; ++dx)
                        for (int ch = 0; ch < stacked.channels; ++ch)
                            tr.patches(n, col++) = stacked.at(f, py * c.patch + dy, px * c.patch + dx, ch);
                tr.pos_index[static_cast<std::size_t>(n)] = (input.patch_y + py) * c.grid_width + input.patch_x + px;
                tr.token_frames[static_cast<std::size_t>(n)] = f;
            }
        }
    }

    Matrix x = affine(tr.patches, w(ids_.in_w), w(ids_.in_b));
    for (Eigen::Index i = 0; i < n_tokens; ++i) x.row(i) += w(ids_.pos).row(tr.pos_index[static_cast<std::size_t>(i)]);
    tr.time_features.resize(1, c.time_features);
    for (int k = 0; k < c.time_features / 2; ++k) {
        const double omega = std::ldexp(1.0, k);
        tr.time_features(0, 2 * k) = std::sin(omega * t);
        tr.time_features(0, 2 * k + 1) = std::cos(omega * t);
    }
    const Matrix te = affine(tr.time_features, w(ids_.time_w), w(ids_.time_b));
    x.rowwise() += te.row(0);

    tr.raw = input.lights.features;
    tr.proj_pre = affine(tr.raw, w(ids_.p_w1), w(ids_.p_b1));
    tr.proj_hidden = gelu_of(tr.proj_pre);
    tr.light_tokens = affine(tr.proj_hidden, w(ids_.p_w2), w(ids_.p_b2));

    const auto self_groups = attn::full_groups(n_tokens, n_tokens);
    const auto cross_groups = attn::frame_groups(tr.token_frames, input.lights.frames, T);

    tr.blocks.assign(ids_.blocks.size(), BlockTrace{});
    for (std::size_t b = 0; b < ids_.blocks.size(); ++b) {
        const BlockIds& id = ids_.blocks[b];
        BlockTrace& bt = tr.blocks[b];
        bt.x_in = x;
        bt.a = layer_norm(x, w(id.ln1_g), w(id.ln1_b), bt.ln1);
        bt.q = bt.a * w(id.wq);
        bt.k = bt.a * w(id.wk);
        bt.v = bt.a * w(id.wv);
        bt.self_out = attn::attend(bt.q, bt.k, bt.v, self_groups, c.heads, &bt.self_cache);
        x += affine(bt.self_out, w(id.wo), w(id.bo));
        bt.x_mid = x;

        bt.c = layer_norm(x, w(id.ln2_g), w(id.ln2_b), bt.ln2);
        bt.cq = bt.c * w(id.cwq);
        bt.ck = tr.light_tokens * w(id.cwk);
        bt.cv = tr.light_tokens * w(id.cwv);
        bt.cross_out = attn::attend(bt.cq, bt.ck, bt.cv, cross_groups, c.heads, &bt.cross_cache);
        x += affine(bt.cross_out, w(id.cwo), w(id.cbo));
        bt.x_cross = x;

        bt.f = layer_norm(x, w(id.ln3_g), w(id.ln3_b), bt.ln3);
        bt.pre = affine(bt.f, w(id.f_w1), w(id.f_b1));
        bt.hidden = gelu_of(bt.pre);
        x += affine(bt.hidden, w(id.f_w2), w(id.f_b2));
    }
    tr.x_final = x;
    const Matrix normed = layer_norm(x, w(ids_.out_g), w(ids_.out_b), tr.ln_out);
    tr.y = affine(normed, w(ids_.out_w), w(ids_.out_bias));

    Latent h = Latent::zeros(T, cond.height, cond.width, c.channels);
    n = 0;
    for (int f = 0; f < T; ++f) {
        for (int py = 0; py < ph; ++py) {
            for (int px = 0; px < pw; ++px, ++n) {
                Eigen::Index col = 0;
                for (int dy = 0; dy < c.patch; ++dy)
                    for (int dx = 0; dx < c.patch; ++dx)
                        for (int ch = 0; ch < c.channels; ++ch)
                            h.at(f, py * c.patch + dy, px * c.patch + dx, ch) = tr.y(n, col++);
            }
        }
    }
    return h;
}

Latent ToyModel::predict_noise(const ToyInput& input, const Latent& z_t, double t) const {
    const Latent h = predict_clean(input, z_t, t);
    Latent eps = h;
    for (std::size_t i = 0; i < eps.data.size(); ++i) eps.data[i] = (z_t.data[i] - (1.0 - t) * h.data[i]) / t;
    return eps;
}

void ToyModel::backward(const ForwardTrace& tr, const Matrix& d_y) {
    const ToyConfig& c = config_;
    // Head.
    const Matrix normed =
        (tr.ln_out.xhat.array().rowwise() * w(ids_.out_g).row(0).array()).rowwise() + w(ids_.out_b).row(0).array();
    g(ids_.out_w) += normed.transpose() * d_y;
    g(ids_.out_bias).row(0) += d_y.colwise().sum();
    Matrix dx = layer_norm_backward(d_y * w(ids_.out_w).transpose(), tr.ln_out, w(ids_.out_g), g(ids_.out_g),
                                    g(ids_.out_b));

    Matrix d_light = Matrix::Zero(tr.light_tokens.rows(), tr.light_tokens.cols());
    for (std::size_t bi = ids_.blocks.size(); bi-- > 0;) {
        const BlockIds& id = ids_.blocks[bi];
        const BlockTrace& bt = tr.blocks[bi];

        // Feed-forward.
        g(id.f_w2) += bt.hidden.transpose() * dx;
        g(id.f_b2).row(0) += dx.colwise().sum();
        const Matrix d_pre = gelu_backward(dx * w(id.f_w2).transpose(), bt.pre);
        g(id.f_w1) += bt.f.transpose() * d_pre;
        g(id.f_b1).row(0) += d_pre.colwise().sum();
        dx += layer_norm_backward(d_pre * w(id.f_w1).transpose(), bt.ln3, w(id.ln3_g), g(id.ln3_g), g(id.ln3_b));

        // Cross-attention to light tokens.
        g(id.cwo) += bt.cross_out.transpose() * dx;
        g(id.cbo).row(0) += dx.colwise().sum();
        const Matrix d_cross = dx * w(id.cwo).transpose();
        Matrix dq = Matrix::Zero(bt.cq.rows(), bt.cq.cols());
        Matrix dk = Matrix::Zero(bt.ck.rows(), bt.ck.cols());
        Matrix dv = Matrix::Zero(bt.cv.rows(), bt.cv.cols());
        attn::attend_backward(bt.cross_cache, bt.cq, bt.ck, bt.cv, d_cross, dq, dk, dv);
        g(id.cwq) += bt.c.transpose() * dq;
        g(id.cwk) += tr.light_tokens.transpose() * dk;
        g(id.cwv) += tr.light_tokens.transpose() * dv;
        d_light += dk * w(id.cwk).transpose() + dv * w(id.cwv).transpose();
        dx += layer_norm_backward(dq * w(id.cwq).transpose(), bt.ln2, w(id.ln2_g), g(id.ln2_g), g(id.ln2_b));

        // Self-attention.
        g(id.wo) += bt.self_out.transpose() * dx;
        g(id.bo).row(0) += dx.colwise().sum();
        const Matrix d_self = dx * w(id.wo).transpose();
        Matrix sq = Matrix::Zero(bt.q.rows(), bt.q.cols());
        Matrix sk = Matrix::Zero(bt.k.rows(), bt.k.cols());
        Matrix sv = Matrix::Zero(bt.v.rows(), bt.v.cols());
        attn::attend_backward(bt.self_cache, bt.q, bt.k, bt.v, d_self, sq, sk, sv);
        g(id.wq) += bt.a.transpose() * sq;
        g(id.wk) += bt.a.transpose() * sk;
        g(id.wv) += bt.a.transpose() * sv;
        const Matrix d_a = sq * w(id.wq).transpose() + sk * w(id.wk).transpose() + sv * w(id.wv).transpose();
        dx += layer_norm_backward(d_a, bt.ln1, w(id.ln1_g), g(id.ln1_g), g(id.ln1_b));
    }

    // Embedding, positions and time.
    g(ids_.in_w) += tr.patches.transpose() * dx;
    g(ids_.in_b).row(0) += dx.colwise().sum();
    for (Eigen::Index i = 0; i < dx.rows(); ++i) g(ids_.pos).row(tr.pos_index[static_cast<std::size_t>(i)]) += dx.row(i);
    const Eigen::RowVectorXd d_te = dx.colwise().sum();
    g(ids_.time_w) += tr.time_features.transpose() * d_te;
    g(ids_.time_b).row(0) += d_te;

    // Light-token projector, shared by every block.
    g(ids_.p_w2) += tr.proj_hidden.transpose() * d_light;
    g(ids_.p_b2).row(0) += d_light.colwise().sum();
    const Matrix d_pre = gelu_backward(d_light * w(ids_.p_w2).transpose(), tr.proj_pre);
    g(ids_.p_w1) += tr.raw.transpose() * d_pre;
    g(ids_.p_b1).row(0) += d_pre.colwise().sum();
    (void)c;
}

double ToyModel::loss(const ToyInput& input, const Latent& z0, const Latent& eps, double t) const {
    check_finite_time(t);
    const Latent z_t = flow_forward(z0, eps, t);
    const Latent h = predict_clean(input, z_t, t);
    double sum = 0.0;
    for (std::size_t i = 0; i < h.data.size(); ++i) {
        const double r = (z_t.data[i] - (1.0 - t) * h.data[i]) / t - eps.data[i];
        sum += r * r;
    }
    return sum / static_cast<double>(h.data.size());
}

double ToyModel::loss_and_grads(const ToyInput& input, const Latent& z0, const Latent& eps, double t) {
    check_finite_time(t);
    const Latent z_t = flow_forward(z0, eps, t);
    ForwardTrace tr;
    const Latent h = predict_clean(input, z_t, t, &tr);
    const auto m = static_cast<double>(h.data.size());
    double sum = 0.0;
    Latent d_h = h;
    for (std::size_t i = 0; i < h.data.size(); ++i) {
        const double r = (z_t.data[i] - (1.0 - t) * h.data[i]) / t - eps.data[i];
        sum += r * r;
        d_h.data[i] = -(1.0 - t) / t * 2.0 * r / m;
    }
    const double value = sum / m;
    if (!std::isfinite(value)) return value;

    // Patch the latent gradient back into head-output layout.
    const ToyConfig& c = config_;
    const int ph = h.height / c.patch;
    const int pw = h.width / c.patch;
    Matrix d_y(tr.y.rows(), tr.y.cols());
    Eigen::Index n = 0;
    for (int f = 0; f < h.frames; ++f) {
        for (int py = 0; py < ph; ++py) {
            for (int px = 0; px < pw; ++px, ++n) {
                Eigen::Index col = 0;
                for (int dy = 0; dy < c.patch; ++dy)
                    for (int dx = 0; dx < c.patch; ++dx)
                        for (int ch = 0; ch < c.channels; ++ch)
                            d_y(n, col++) = d_h.at(f, py * c.patch + dy, px * c.patch + dx, ch);
            }
        }
    }
    backward(tr, d_y);
    return value;
}

std::vector<Matrix> ToyModel::snapshot() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
}

void ToyModel::restore(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw InvalidArgument("snapshot has a different parameter count");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].rows() != params_[i].value.rows() || values[i].cols() != params_[i].value.cols())
            throw InvalidArgument("snapshot shape differs for " + params_[i].name);
        params_[i].value = values[i];
    }
}

void ToyModel::save(const std::string& path) const {
    static_assert(std::endian::native == std::endian::little, "model files are little-endian");
    nlohmann::json header;
    header["config"] = config_.to_json();
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : params_) list.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    header["params"] = list;
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_raw(out, kMagic, 4);
    write_raw(out, &kFormatVersion, 4);
    const std::uint64_t len = text.size();
    write_raw(out, &len, 8);
    write_raw(out, text.data(), text.size());
    for (const auto& p : params_) write_raw(out, p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double));
    if (!out) throw std::runtime_error("failed writing " + path);
}

ToyModel ToyModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::size_t offset = 0;
    char magic[4];
    read_raw(in, magic, 4, offset);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a relux model file", 0);
    std::uint32_t version = 0;
    read_raw(in, &version, 4, offset);
    if (version != kFormatVersion) throw UnsupportedFormat("model format version " + std::to_string(version));
    std::uint64_t len = 0;
    read_raw(in, &len, 8, offset);
    if (len > (1u << 26)) throw FormatError("implausible model header length", 8);
    std::string text(len, '\0');
    read_raw(in, text.data(), len, offset);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("model header: ") + e.what(), 16 + e.byte);
    }
    ToyModel model;
    model.config_ = ToyConfig::from_json(header.at("config"));
    model.build_layout();
    const auto& list = header.at("params");
    if (list.size() != model.params_.size()) throw FormatError("model parameter list differs from its config", 16);
    for (std::size_t i = 0; i < list.size(); ++i) {
        Param& p = model.params_[i];
        if (list[i].at("name").get<std::string>() != p.name || list[i].at("rows").get<Eigen::Index>() != p.value.rows() ||
            list[i].at("cols").get<Eigen::Index>() != p.value.cols())
            throw FormatError("model parameter " + p.name + " has an unexpected shape", 16);
        read_raw(in, p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double), offset);
    }
    return model;
}

std::vector<GradientCheck> check_gradients(ToyModel& model, const ToyInput& input, const Latent& z0,
                                           const Latent& eps, double t, int coordinates, std::uint64_t seed,
                                           double step, double floor) {
    model.zero_grad();
    model.loss_and_grads(input, z0, eps, t);
    auto& params = model.params();
    std::mt19937_64 rng(seed);
    std::vector<GradientCheck> out;
    // Round-robin over parameter groups so every group is represented.
    for (int i = 0; i < coordinates; ++i) {
        Param& p = params[static_cast<std::size_t>(i) % params.size()];
        std::uniform_int_distribution<Eigen::Index> row(0, p.value.rows() - 1);
        std::uniform_int_distribution<Eigen::Index> col(0, p.value.cols() - 1);
        GradientCheck gc;
        gc.param = p.name;
        gc.row = row(rng);
        gc.col = col(rng);
        gc.analytic = p.grad(gc.row, gc.col);
        const double orig = p.value(gc.row, gc.col);
        p.value(gc.row, gc.col) = orig + step;
        const double up = model.loss(input, z0, eps, t);
        p.value(gc.row, gc.col) = orig - step;
        const double down = model.loss(input, z0, eps, t);
        p.value(gc.row, gc.col) = orig;
        gc.numeric = (up - down) / (2.0 * step);
        gc.relative_error =
            std::abs(gc.analytic - gc.numeric) / std::max({std::abs(gc.analytic), std::abs(gc.numeric), floor});
        out.push_back(gc);
    }
    return out;
}

}  // namespace relux::toy
