#include "gatgan/layers.hpp"

#include <cmath>
#include <string>

#include "gatgan/errors.hpp"

namespace gatgan {

namespace {

Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t = Tensor::uniform(std::move(shape), rng, -a, a);
    t.set_requires_grad(true);
    return t;
}

Tensor zeros_param(Shape shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    t.set_requires_grad(true);
    return t;
}

void expect_rank3(const Tensor& x, const char* who) {
    if (x.rank() != 3) {
        throw DimensionError(std::string(who) + " expects a [K,T,F] input, got " +
                             shape_str(x.shape()));
    }
}

}  // namespace

// -------------------------------------------------------------------------
// Dense
// -------------------------------------------------------------------------

Dense::Dense(std::size_t in, std::size_t out, Rng& rng)
    : weight(xavier({in, out}, in, out, rng)), bias(zeros_param({out})), in_(in), out_(out) {}

Tensor Dense::forward(const Tensor& x) const {
    if (x.rank() < 2 || x.shape().back() != in_) {
        throw DimensionError("dense layer of width " + std::to_string(in_) +
                             " cannot consume input " + shape_str(x.shape()));
    }
    return add(matmul(x, weight), bias);
}

void Dense::params(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

// -------------------------------------------------------------------------
// SpectralConv1d
// -------------------------------------------------------------------------

SpectralConv1d::SpectralConv1d(std::size_t width, std::size_t in, std::size_t out, Rng& rng,
                               double slope)
    : kernel(xavier({width, in, out}, width * in, out, rng)),
      bias(zeros_param({out})),
      width_(width),
      in_(in),
      out_(out),
      slope_(slope) {
    const std::size_t rows = width * in;
    u = Tensor::normal({rows}, rng);
    double norm = 0.0;
    for (double v : u.values()) norm += v * v;
    norm = std::sqrt(norm) + 1e-12;
    for (double& v : u.values_mut()) v /= norm;
}

void SpectralConv1d::power_iterate(std::vector<double>& u_vec, std::vector<double>& v_vec) const {
    const std::size_t rows = width_ * in_, cols = out_;
    const auto m = kernel.values();  // [rows, cols] row-major
    v_vec.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double ur = u_vec[r];
        for (std::size_t c = 0; c < cols; ++c) v_vec[c] += m[r * cols + c] * ur;
    }
    double vn = 0.0;
    for (double v : v_vec) vn += v * v;
    vn = std::sqrt(vn) + 1e-12;
    for (double& v : v_vec) v /= vn;

    std::vector<double> un(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += m[r * cols + c] * v_vec[c];
        un[r] = acc;
    }
    double unorm = 0.0;
    for (double v : un) unorm += v * v;
    unorm = std::sqrt(unorm) + 1e-12;
    for (double& v : un) v /= unorm;
    u_vec = std::move(un);
}

Tensor SpectralConv1d::forward(const Tensor& x, bool training) {
    expect_rank3(x, "spectral conv");
    if (x.shape()[2] != in_) {
        throw DimensionError("spectral conv expects " + std::to_string(in_) + " channels, got " +
                             shape_str(x.shape()));
    }
    const std::size_t rows = width_ * in_, cols = out_;

    std::vector<double> u_vec(u.values().begin(), u.values().end());
    std::vector<double> v_vec;
    if (training) {
        power_iterate(u_vec, v_vec);
        std::copy(u_vec.begin(), u_vec.end(), u.values_mut().begin());
    } else {
        // Derive the paired right vector without touching the stored state.
        const auto m = kernel.values();
        v_vec.assign(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double ur = u_vec[r];
            for (std::size_t c = 0; c < cols; ++c) v_vec[c] += m[r * cols + c] * ur;
        }
        double vn = 0.0;
        for (double v : v_vec) vn += v * v;
        vn = std::sqrt(vn) + 1e-12;
        for (double& v : v_vec) v /= vn;
    }

    // sigma = u^T W v with u, v held constant; gradients reach the kernel
    // through both this scale and the convolution itself.
    Tensor u_row({1, rows}, u_vec);
    Tensor v_col({cols, 1}, v_vec);
    Tensor flat = reshape(kernel, {rows, cols});
    Tensor sigma = reshape(matmul(matmul(u_row, flat), v_col), {});
    Tensor scaled = div(kernel, add_scalar(sigma, 1e-12));

    Tensor y = add(conv1d(x, scaled, Padding::same), bias);
    return leaky_relu(y, slope_);
}

void SpectralConv1d::refine_power_iteration(int iters) {
    std::vector<double> u_vec(u.values().begin(), u.values().end());
    std::vector<double> v_vec;
    for (int i = 0; i < iters; ++i) power_iterate(u_vec, v_vec);
    std::copy(u_vec.begin(), u_vec.end(), u.values_mut().begin());
}

double SpectralConv1d::estimated_norm() const {
    const std::size_t rows = width_ * in_, cols = out_;
    std::vector<double> u_vec(u.values().begin(), u.values().end());
    std::vector<double> v_vec;
    power_iterate(u_vec, v_vec);
    const auto m = kernel.values();
    double sigma = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += m[r * cols + c] * v_vec[c];
        sigma += u_vec[r] * acc;
    }
    return sigma;
}

Tensor SpectralConv1d::normalized_kernel() const {
    const double sigma = estimated_norm() + 1e-12;
    Tensor out = kernel.detached();
    for (double& v : out.values_mut()) v /= sigma;
    return out;
}

void SpectralConv1d::params(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".kernel", kernel});
    out.push_back({prefix + ".bias", bias});
}

void SpectralConv1d::buffers(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".u", u});
}

// -------------------------------------------------------------------------
// GraphAttentionLayer
// -------------------------------------------------------------------------

GraphAttentionLayer::GraphAttentionLayer(GatOrientation orientation, std::size_t nodes,
                                         std::size_t feat, Rng& rng, bool residual, double slope)
    : w1(xavier({2 * feat, 2 * feat}, 2 * feat, 2 * feat, rng)),
      w2(xavier({2 * feat}, 2 * feat, 1, rng)),
      bias_mat(zeros_param({nodes, nodes})),
      orientation_(orientation),
      nodes_(nodes),
      feat_(feat),
      residual_(residual),
      slope_(slope) {
    if (nodes == 0 || feat == 0) {
        throw DimensionError("graph attention needs at least one node and one feature");
    }
}

Tensor GraphAttentionLayer::to_nodes(const Tensor& x) const {
    expect_rank3(x, "graph attention");
    const bool spatial = orientation_ == GatOrientation::spatial;
    const std::size_t want_t = spatial ? feat_ : nodes_;
    const std::size_t want_f = spatial ? nodes_ : feat_;
    if (x.shape()[1] != want_t || x.shape()[2] != want_f) {
        throw DimensionError("graph attention configured for [K," + std::to_string(want_t) + "," +
                             std::to_string(want_f) + "], got " + shape_str(x.shape()));
    }
    return spatial ? transpose_last2(x) : x;
}

Tensor GraphAttentionLayer::from_nodes(const Tensor& z) const {
    return orientation_ == GatOrientation::spatial ? transpose_last2(z) : z;
}

std::pair<Tensor, Tensor> GraphAttentionLayer::forward_with_scores(const Tensor& x) const {
    Tensor chi = to_nodes(x);  // [K, N, D]
    const std::size_t K = chi.shape()[0], N = nodes_, D = feat_;

    Tensor lhs = repeat_axis(reshape(chi, {K, N, 1, D}), 2, N);  // pair (j,k) -> chi_j
    Tensor rhs = repeat_axis(reshape(chi, {K, 1, N, D}), 1, N);  // pair (j,k) -> chi_k
    Tensor pairs = concat_last(lhs, rhs);                        // [K, N, N, 2D]

    Tensor hidden = leaky_relu(matmul(pairs, w1), slope_);
    Tensor logits = reshape(matmul(hidden, reshape(w2, {2 * D, 1})), {K, N, N});
    Tensor alpha = softmax_last(add(logits, bias_mat));

    Tensor value_map = slice_axis(slice_axis(w1, 0, 0, D), 1, 0, D);  // leading DxD block
    Tensor values = matmul(chi, value_map);                           // [K, N, D]
    Tensor mixed = sigmoid(matmul(alpha, values));
    if (residual_) mixed = add(mixed, chi);
    return {from_nodes(mixed), alpha};
}

Tensor GraphAttentionLayer::forward(const Tensor& x) const { return forward_with_scores(x).first; }

Tensor GraphAttentionLayer::scores(const Tensor& x) const { return forward_with_scores(x).second; }

void GraphAttentionLayer::params(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".w1", w1});
    out.push_back({prefix + ".w2", w2});
    out.push_back({prefix + ".bias", bias_mat});
}

// -------------------------------------------------------------------------
// BatchNorm
// -------------------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t features)
    : gamma(zeros_param({features})),
      beta(zeros_param({features})),
      running_mean(Tensor::zeros({features})),
      running_var(Tensor::ones({features})),
      features_(features) {
    for (double& v : gamma.values_mut()) v = 1.0;
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
    expect_rank3(x, "batch norm");
    if (x.shape()[2] != features_) {
        throw DimensionError("batch norm over " + std::to_string(features_) +
                             " features cannot consume " + shape_str(x.shape()));
    }
    Tensor xhat;
    if (training) {
        Tensor mu = reduce(x, Reduce::mean, {0, 1}, true);  // [1,1,F]
        Tensor centered = sub(x, mu);
        Tensor var = reduce(mul(centered, centered), Reduce::mean, {0, 1}, true);
        xhat = div(centered, sqrt(add_scalar(var, eps)));

        auto rm = running_mean.values_mut();
        auto rv = running_var.values_mut();
        const auto bm = mu.values();
        const auto bv = var.values();
        for (std::size_t f = 0; f < features_; ++f) {
            rm[f] = momentum * rm[f] + (1.0 - momentum) * bm[f];
            rv[f] = momentum * rv[f] + (1.0 - momentum) * bv[f];
        }
    } else {
        std::vector<double> inv(features_);
        for (std::size_t f = 0; f < features_; ++f) {
            inv[f] = 1.0 / std::sqrt(running_var.values()[f] + eps);
        }
        Tensor shift({features_},
                     std::vector<double>(running_mean.values().begin(), running_mean.values().end()));
        xhat = mul(sub(x, shift), Tensor({features_}, std::move(inv)));
    }
    return add(mul(xhat, gamma), beta);
}

void BatchNorm::params(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

void BatchNorm::buffers(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".running_mean", running_mean});
    out.push_back({prefix + ".running_var", running_var});
}

// -------------------------------------------------------------------------
// ResidualFFN
// -------------------------------------------------------------------------

ResidualFFN::ResidualFFN(std::size_t features, std::size_t depth, Rng& rng, double slope)
    : slope_(slope) {
    if (depth == 0) throw ContractError("residual FFN depth must be >= 1");
    layers.reserve(depth);
    norms.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        layers.emplace_back(features, features, rng);
        norms.emplace_back(features);
    }
}

Tensor ResidualFFN::forward(const Tensor& x, bool training) {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = norms[i].forward(leaky_relu(layers[i].forward(h), slope_), training);
    }
    return add(h, x);
}

void ResidualFFN::params(ParamList& out, const std::string& prefix) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = prefix + ".layer" + std::to_string(i);
        layers[i].params(out, p + ".affine");
        norms[i].params(out, p + ".norm");
    }
}

void ResidualFFN::buffers(ParamList& out, const std::string& prefix) {
    for (std::size_t i = 0; i < norms.size(); ++i) {
        norms[i].buffers(out, prefix + ".layer" + std::to_string(i) + ".norm");
    }
}

// -------------------------------------------------------------------------
// LstmStack
// -------------------------------------------------------------------------

LstmStack::LstmStack(std::size_t input, std::size_t hidden, std::size_t layers, Rng& rng)
    : proj_w(xavier({hidden, input}, hidden, input, rng)),
      proj_b(zeros_param({input})),
      input_(input),
      hidden_(hidden) {
    if (layers == 0) throw ContractError("LSTM stack needs at least one layer");
    cells.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = l == 0 ? input : hidden;
        Cell cell{xavier({in, 4 * hidden}, in, 4 * hidden, rng),
                  xavier({hidden, 4 * hidden}, hidden, 4 * hidden, rng),
                  zeros_param({4 * hidden})};
        // Positive forget-gate bias keeps early memory open.
        auto b = cell.b.values_mut();
        for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;
        cells.push_back(cell);
    }
}

Tensor LstmStack::step(const Tensor& xt, std::vector<Tensor>& h, std::vector<Tensor>& c) const {
    Tensor in = xt;
    const std::size_t H = hidden_;
    for (std::size_t l = 0; l < cells.size(); ++l) {
        Tensor gates = add(add(matmul(in, cells[l].wx), matmul(h[l], cells[l].wh)), cells[l].b);
        Tensor i_g = sigmoid(slice_axis(gates, 1, 0, H));
        Tensor f_g = sigmoid(slice_axis(gates, 1, H, H));
        Tensor g_g = tanh_act(slice_axis(gates, 1, 2 * H, H));
        Tensor o_g = sigmoid(slice_axis(gates, 1, 3 * H, H));
        c[l] = add(mul(f_g, c[l]), mul(i_g, g_g));
        h[l] = mul(o_g, tanh_act(c[l]));
        in = h[l];
    }
    return in;
}

namespace {
// Joins per-step [K,F] outputs into [K,T,F].
Tensor stack_time(const std::vector<Tensor>& steps, std::size_t K, std::size_t F) {
    Tensor acc = reshape(steps[0], {K, F, 1});
    for (std::size_t t = 1; t < steps.size(); ++t) {
        acc = concat_last(acc, reshape(steps[t], {K, F, 1}));
    }
    return transpose_last2(acc);
}
}  // namespace

Tensor LstmStack::forward_seq(const Tensor& x) const {
    expect_rank3(x, "LSTM");
    if (x.shape()[2] != input_) {
        throw DimensionError("LSTM of width " + std::to_string(input_) + " cannot consume " +
                             shape_str(x.shape()));
    }
    const std::size_t K = x.shape()[0], T = x.shape()[1];
    if (T == 0) throw ContractError("LSTM needs at least one time step");
    std::vector<Tensor> h(cells.size(), Tensor::zeros({K, hidden_}));
    std::vector<Tensor> c(cells.size(), Tensor::zeros({K, hidden_}));
    std::vector<Tensor> outs;
    outs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor xt = reshape(slice_axis(x, 1, t, 1), {K, input_});
        Tensor ht = step(xt, h, c);
        outs.push_back(add(matmul(ht, proj_w), proj_b));
    }
    return stack_time(outs, K, input_);
}

Tensor LstmStack::rollout(const Tensor& context, std::size_t p) const {
    expect_rank3(context, "LSTM rollout");
    const std::size_t K = context.shape()[0], C = context.shape()[1];
    if (C == 0) throw ContractError("LSTM rollout needs a non-empty context");
    if (p == 0) throw ContractError("LSTM rollout needs p >= 1");
    if (context.shape()[2] != input_) {
        throw DimensionError("LSTM of width " + std::to_string(input_) + " cannot consume " +
                             shape_str(context.shape()));
    }
    std::vector<Tensor> h(cells.size(), Tensor::zeros({K, hidden_}));
    std::vector<Tensor> c(cells.size(), Tensor::zeros({K, hidden_}));
    Tensor ht;
    for (std::size_t t = 0; t < C; ++t) {
        Tensor xt = reshape(slice_axis(context, 1, t, 1), {K, input_});
        ht = step(xt, h, c);
    }
    std::vector<Tensor> preds;
    preds.reserve(p);
    Tensor pred = add(matmul(ht, proj_w), proj_b);
    preds.push_back(pred);
    for (std::size_t s = 1; s < p; ++s) {
        ht = step(pred, h, c);
        pred = add(matmul(ht, proj_w), proj_b);
        preds.push_back(pred);
    }
    return stack_time(preds, K, input_);
}

void LstmStack::params(ParamList& out, const std::string& prefix) {
    for (std::size_t l = 0; l < cells.size(); ++l) {
        const std::string p = prefix + ".cell" + std::to_string(l);
        out.push_back({p + ".wx", cells[l].wx});
        out.push_back({p + ".wh", cells[l].wh});
        out.push_back({p + ".b", cells[l].b});
    }
    out.push_back({prefix + ".proj.weight", proj_w});
    out.push_back({prefix + ".proj.bias", proj_b});
}

// -------------------------------------------------------------------------
// LayerNorm
// -------------------------------------------------------------------------

LayerNorm::LayerNorm(std::size_t features)
    : gamma(zeros_param({features})), beta(zeros_param({features})) {
    for (double& v : gamma.values_mut()) v = 1.0;
}

Tensor LayerNorm::forward(const Tensor& x) const {
    if (x.rank() == 0 || x.shape().back() != gamma.shape()[0]) {
        throw DimensionError("layer norm over " + std::to_string(gamma.shape()[0]) +
                             " features cannot consume " + shape_str(x.shape()));
    }
    const std::size_t last = x.rank() - 1;
    Tensor mu = reduce(x, Reduce::mean, {last}, true);
    Tensor centered = sub(x, mu);
    Tensor var = reduce(mul(centered, centered), Reduce::mean, {last}, true);
    Tensor xhat = div(centered, sqrt(add_scalar(var, eps)));
    return add(mul(xhat, gamma), beta);
}

void LayerNorm::params(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

// -------------------------------------------------------------------------
// TransformerEmbedder
// -------------------------------------------------------------------------

TransformerEmbedder::TransformerEmbedder(std::size_t features, std::size_t d_model,
                                         std::size_t heads, std::size_t blocks, Rng& rng)
    : input_proj(features, d_model, rng),
      head(d_model, features, rng),
      features_(features),
      d_(d_model),
      heads_(heads),
      blocks_(blocks) {
    if (heads == 0 || d_model % heads != 0) {
        throw ContractError("embedder dimension must divide evenly across heads");
    }
    blocks_list.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        blocks_list.push_back(Block{Dense(d_model, d_model, rng), Dense(d_model, d_model, rng),
                                    Dense(d_model, d_model, rng), Dense(d_model, d_model, rng),
                                    Dense(d_model, 4 * d_model, rng),
                                    Dense(4 * d_model, d_model, rng), LayerNorm(d_model),
                                    LayerNorm(d_model)});
    }
}

namespace {
Tensor sinusoidal_positions(std::size_t T, std::size_t d) {
    Tensor pe({T, d});
    auto v = pe.values_mut();
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double rate = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            v[t * d + i] = std::sin(static_cast<double>(t) / rate);
            if (i + 1 < d) v[t * d + i + 1] = std::cos(static_cast<double>(t) / rate);
        }
    }
    return pe;
}
}  // namespace

Tensor TransformerEmbedder::encoder_states(const Tensor& x) const {
    expect_rank3(x, "embedder");
    if (x.shape()[2] != features_) {
        throw DimensionError("embedder over " + std::to_string(features_) +
                             " features cannot consume " + shape_str(x.shape()));
    }
    const std::size_t T = x.shape()[1];
    if (T < 1) throw ContractError("embedder needs at least one time step");

    Tensor h = add(input_proj.forward(x), sinusoidal_positions(T, d_));
    last_attention_.clear();
    const std::size_t dh = d_ / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (const Block& blk : blocks_list) {
        Tensor q = blk.wq.forward(h), k = blk.wk.forward(h), v = blk.wv.forward(h);
        Tensor heads_out;
        for (std::size_t j = 0; j < heads_; ++j) {
            Tensor qh = slice_axis(q, 2, j * dh, dh);
            Tensor kh = slice_axis(k, 2, j * dh, dh);
            Tensor vh = slice_axis(v, 2, j * dh, dh);
            Tensor att = softmax_last(mul_scalar(matmul(qh, transpose_last2(kh)), scale));
            last_attention_.push_back(att.detached());
            Tensor oh = matmul(att, vh);
            heads_out = j == 0 ? oh : concat_last(heads_out, oh);
        }
        h = blk.ln1.forward(add(h, blk.wo.forward(heads_out)));
        Tensor ff = blk.ff2.forward(leaky_relu(blk.ff1.forward(h), 0.2));
        h = blk.ln2.forward(add(h, ff));
    }
    return h;
}

Tensor TransformerEmbedder::embed(const Tensor& x) const {
    return reduce(encoder_states(x), Reduce::mean, {1}, false);
}

Tensor TransformerEmbedder::predict_next(const Tensor& x) const {
    return head.forward(embed(x));
}

void TransformerEmbedder::params(ParamList& out, const std::string& prefix) {
    input_proj.params(out, prefix + ".input");
    for (std::size_t b = 0; b < blocks_list.size(); ++b) {
        const std::string p = prefix + ".block" + std::to_string(b);
        blocks_list[b].wq.params(out, p + ".wq");
        blocks_list[b].wk.params(out, p + ".wk");
        blocks_list[b].wv.params(out, p + ".wv");
        blocks_list[b].wo.params(out, p + ".wo");
        blocks_list[b].ff1.params(out, p + ".ff1");
        blocks_list[b].ff2.params(out, p + ".ff2");
        blocks_list[b].ln1.params(out, p + ".ln1");
        blocks_list[b].ln2.params(out, p + ".ln2");
    }
    head.params(out, prefix + ".head");
}

}  // namespace gatgan
