#include "gatgan/model.hpp"

#include <string>

#include "gatgan/errors.hpp"

namespace gatgan {

void ModelConfig::validate() const {
    if (tau < 2) throw ConfigError("window length must be >= 2");
    if (features == 0) throw ConfigError("feature count must be >= 1");
    if (latent == 0) throw ConfigError("latent width must be >= 1");
    if (attention_pairs == 0) throw ConfigError("attention pair count must be >= 1");
    if (ffn_depth == 0) throw ConfigError("FFN depth must be >= 1");
    if (conv_width == 0 || conv_width > tau) {
        throw ConfigError("conv width must lie in [1, window length]");
    }
    if (noise_std < 0.0) throw ConfigError("noise scale must be >= 0");
    if (slope <= 0.0 || slope >= 1.0) throw ConfigError("activation slope must lie in (0,1)");
}

Tensor inject_noise(const Tensor& x, double noise_std, Rng& rng) {
    if (noise_std < 0.0) throw ContractError("noise scale must be >= 0");
    if (noise_std == 0.0) return x;
    Tensor out = x.detached();
    for (double& v : out.values_mut()) v += rng.normal(0.0, noise_std);
    return out;
}

namespace {

void check_series(const Tensor& x, const ModelConfig& cfg, const char* who) {
    if (x.rank() != 3 || x.shape()[1] != cfg.tau || x.shape()[2] != cfg.features) {
        throw DimensionError(std::string(who) + " expects [K," + std::to_string(cfg.tau) + "," +
                             std::to_string(cfg.features) + "], got " + shape_str(x.shape()));
    }
}

void check_latent(const Tensor& z, const ModelConfig& cfg, const char* who) {
    if (z.rank() != 3 || z.shape()[1] != cfg.tau || z.shape()[2] != cfg.latent) {
        throw DimensionError(std::string(who) + " expects [K," + std::to_string(cfg.tau) + "," +
                             std::to_string(cfg.latent) + "], got " + shape_str(z.shape()));
    }
}

// Alternating spatial/temporal attention rounds over [K,tau,latent].
void build_attention(const ModelConfig& cfg, Rng& rng, bool residual,
                     std::vector<GraphAttentionLayer>& spatial,
                     std::vector<GraphAttentionLayer>& temporal) {
    for (std::size_t i = 0; i < cfg.attention_pairs; ++i) {
        if (cfg.use_spatial) {
            spatial.emplace_back(GatOrientation::spatial, cfg.latent, cfg.tau, rng, residual,
                                 cfg.slope);
        }
        if (cfg.use_temporal) {
            temporal.emplace_back(GatOrientation::temporal, cfg.tau, cfg.latent, rng, residual,
                                  cfg.slope);
        }
    }
}

Tensor run_attention(const Tensor& x, std::size_t pairs, bool use_spatial, bool use_temporal,
                     const std::vector<GraphAttentionLayer>& spatial,
                     const std::vector<GraphAttentionLayer>& temporal) {
    Tensor h = x;
    for (std::size_t i = 0; i < pairs; ++i) {
        if (use_spatial) h = spatial[i].forward(h);
        if (use_temporal) h = temporal[i].forward(h);
    }
    return h;
}

void attention_params(std::vector<GraphAttentionLayer>& spatial,
                      std::vector<GraphAttentionLayer>& temporal, ParamList& out,
                      const std::string& prefix) {
    for (std::size_t i = 0; i < spatial.size(); ++i) {
        spatial[i].params(out, prefix + ".spatial" + std::to_string(i));
    }
    for (std::size_t i = 0; i < temporal.size(); ++i) {
        temporal[i].params(out, prefix + ".temporal" + std::to_string(i));
    }
}

}  // namespace

// -------------------------------------------------------------------------
// Encoder
// -------------------------------------------------------------------------

Encoder::Encoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.use_encoder_conv) {
        convs_.emplace_back(cfg.conv_width, cfg.features, cfg.latent, rng, cfg.slope);
        convs_.emplace_back(cfg.conv_width, cfg.latent, cfg.latent, rng, cfg.slope);
    } else {
        affine_in_ = std::make_unique<Dense>(cfg.features, cfg.latent, rng);
    }
    build_attention(cfg, rng, /*residual=*/false, spatial_, temporal_);
    ffn_ = std::make_unique<ResidualFFN>(cfg.latent, cfg.ffn_depth, rng, cfg.slope);
}

Tensor Encoder::forward(const Tensor& x, bool training) {
    check_series(x, cfg_, "encoder");
    Tensor h = cfg_.use_encoder_conv ? convs_[0].forward(x, training) : affine_in_->forward(x);
    h = run_attention(h, cfg_.attention_pairs, cfg_.use_spatial, cfg_.use_temporal, spatial_,
                      temporal_);
    if (cfg_.use_encoder_conv) {
        h = convs_[1].forward(h, training);
        h = avg_pool1d(h, 2, 1, Padding::same);
    }
    return ffn_->forward(h, training);
}

void Encoder::params(ParamList& out, const std::string& prefix) {
    if (cfg_.use_encoder_conv) {
        convs_[0].params(out, prefix + ".conv_in");
        convs_[1].params(out, prefix + ".conv_out");
    } else {
        affine_in_->params(out, prefix + ".affine_in");
    }
    attention_params(spatial_, temporal_, out, prefix);
    ffn_->params(out, prefix + ".ffn");
}

void Encoder::buffers(ParamList& out, const std::string& prefix) {
    if (cfg_.use_encoder_conv) {
        convs_[0].buffers(out, prefix + ".conv_in");
        convs_[1].buffers(out, prefix + ".conv_out");
    }
    ffn_->buffers(out, prefix + ".ffn");
}

void Encoder::refine_spectral_estimates(int iters) {
    for (auto& conv : convs_) conv.refine_power_iteration(iters);
}

// -------------------------------------------------------------------------
// Decoder
// -------------------------------------------------------------------------

Decoder::Decoder(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg), out_proj_(cfg.latent, cfg.features, rng) {
    if (!cfg.affine_decoder) {
        build_attention(cfg, rng, /*residual=*/false, spatial_, temporal_);
        ffn_ = std::make_unique<ResidualFFN>(cfg.latent, cfg.ffn_depth, rng, cfg.slope);
    }
}

Tensor Decoder::forward(const Tensor& z, bool training) {
    check_latent(z, cfg_, "decoder");
    if (cfg_.affine_decoder) return sigmoid(out_proj_.forward(z));
    Tensor h = run_attention(z, cfg_.attention_pairs, cfg_.use_spatial, cfg_.use_temporal,
                             spatial_, temporal_);
    h = ffn_->forward(h, training);
    return sigmoid(out_proj_.forward(h));
}

void Decoder::params(ParamList& out, const std::string& prefix) {
    if (!cfg_.affine_decoder) {
        attention_params(spatial_, temporal_, out, prefix);
        ffn_->params(out, prefix + ".ffn");
    }
    out_proj_.params(out, prefix + ".out");
}

void Decoder::buffers(ParamList& out, const std::string& prefix) {
    if (!cfg_.affine_decoder) ffn_->buffers(out, prefix + ".ffn");
}

// -------------------------------------------------------------------------
// Discriminator
// -------------------------------------------------------------------------

Discriminator::Discriminator(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg), head_(cfg.tau * cfg.latent, 1, rng) {
    build_attention(cfg, rng, /*residual=*/true, spatial_, temporal_);
    ffn_ = std::make_unique<ResidualFFN>(cfg.latent, cfg.ffn_depth, rng, cfg.slope);
}

Tensor Discriminator::forward(const Tensor& z, bool training) {
    check_latent(z, cfg_, "discriminator");
    const std::size_t k = z.shape()[0];
    Tensor h = run_attention(z, cfg_.attention_pairs, cfg_.use_spatial, cfg_.use_temporal,
                             spatial_, temporal_);
    h = ffn_->forward(h, training);
    Tensor flat = reshape(h, {k, cfg_.tau * cfg_.latent});
    return reshape(sigmoid(head_.forward(flat)), {k});
}

void Discriminator::params(ParamList& out, const std::string& prefix) {
    attention_params(spatial_, temporal_, out, prefix);
    ffn_->params(out, prefix + ".ffn");
    head_.params(out, prefix + ".head");
}

void Discriminator::buffers(ParamList& out, const std::string& prefix) {
    ffn_->buffers(out, prefix + ".ffn");
}

// -------------------------------------------------------------------------
// GatGanModel
// -------------------------------------------------------------------------

GatGanModel::GatGanModel(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng root(cfg_.seed);
    Rng enc_rng = root.stream(1), dec_rng = root.stream(2), disc_rng = root.stream(3);
    encoder_ = std::make_unique<Encoder>(cfg_, enc_rng);
    decoder_ = std::make_unique<Decoder>(cfg_, dec_rng);
    discriminator_ = std::make_unique<Discriminator>(cfg_, disc_rng);
}

Tensor GatGanModel::encode(const Tensor& x, bool training) { return encoder_->forward(x, training); }
Tensor GatGanModel::decode(const Tensor& z, bool training) { return decoder_->forward(z, training); }
Tensor GatGanModel::discriminate(const Tensor& z, bool training) {
    return discriminator_->forward(z, training);
}

Tensor GatGanModel::sample_prior(std::size_t k, Rng& rng) const {
    if (k == 0) throw ContractError("prior sample count must be >= 1");
    return Tensor::normal({k, cfg_.tau, cfg_.latent}, rng);
}

Tensor GatGanModel::generate(std::size_t k, Rng& rng) {
    return decode(sample_prior(k, rng), false);
}

Tensor GatGanModel::regenerate(const Tensor& x, Rng& rng) {
    Tensor noisy = inject_noise(x, cfg_.noise_std, rng);
    return decode(encode(noisy, false), false);
}

ParamList GatGanModel::encoder_params() {
    ParamList out;
    encoder_->params(out, "encoder");
    return out;
}

ParamList GatGanModel::decoder_params() {
    ParamList out;
    decoder_->params(out, "decoder");
    return out;
}

ParamList GatGanModel::discriminator_params() {
    ParamList out;
    discriminator_->params(out, "discriminator");
    return out;
}

ParamList GatGanModel::all_params() {
    ParamList out;
    encoder_->params(out, "encoder");
    decoder_->params(out, "decoder");
    discriminator_->params(out, "discriminator");
    return out;
}

ParamList GatGanModel::all_buffers() {
    ParamList out;
    encoder_->buffers(out, "encoder");
    decoder_->buffers(out, "decoder");
    discriminator_->buffers(out, "discriminator");
    return out;
}

std::size_t GatGanModel::param_count() {
    std::size_t n = 0;
    for (const auto& p : all_params()) n += p.tensor.size();
    return n;
}

void GatGanModel::refine_spectral_estimates(int iters) {
    encoder_->refine_spectral_estimates(iters);
}

}  // namespace gatgan
