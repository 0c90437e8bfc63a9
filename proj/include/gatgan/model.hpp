#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "gatgan/layers.hpp"
#include "gatgan/rng.hpp"
#include "gatgan/tensor.hpp"

namespace gatgan {

struct ModelConfig {
    std::size_t tau = 64;              // window length
    std::size_t features = 5;          // F
    std::size_t latent = 16;           // latent feature width
    std::size_t attention_pairs = 2;   // spatial/temporal rounds per network
    std::size_t ffn_depth = 2;         // residual FFN layers
    std::size_t conv_width = 3;
    double noise_std = 0.1;            // encoder input perturbation scale
    double slope = 0.2;
    std::uint64_t seed = 1234;

    // Ablation switches; all true/false defaults give the full model.
    bool use_spatial = true;
    bool use_temporal = true;
    bool use_encoder_conv = true;   // false: per-timestep affine stand-in
    bool affine_decoder = false;    // true: decoder is one affine + sigmoid

    void validate() const;
};

// Adds elementwise Gaussian perturbation of scale noise_std. The result is
// intentionally not clipped back into [0,1].
Tensor inject_noise(const Tensor& x, double noise_std, Rng& rng);

// Encoder doubles as the generator: series in, latent codes out.
class Encoder {
public:
    Encoder(const ModelConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& x, bool training);  // [K,tau,F] -> [K,tau,latent]
    void params(ParamList& out, const std::string& prefix);
    void buffers(ParamList& out, const std::string& prefix);
    void refine_spectral_estimates(int iters);
    std::vector<SpectralConv1d>& convs() { return convs_; }

private:
    ModelConfig cfg_;
    std::vector<SpectralConv1d> convs_;  // in/out pair when convs enabled
    std::unique_ptr<Dense> affine_in_;   // stand-in when convs disabled
    std::vector<GraphAttentionLayer> spatial_, temporal_;
    std::unique_ptr<ResidualFFN> ffn_;
};

class Decoder {
public:
    Decoder(const ModelConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& z, bool training);  // [K,tau,latent] -> [K,tau,F] in (0,1)
    void params(ParamList& out, const std::string& prefix);
    void buffers(ParamList& out, const std::string& prefix);

private:
    ModelConfig cfg_;
    std::vector<GraphAttentionLayer> spatial_, temporal_;
    std::unique_ptr<ResidualFFN> ffn_;
    Dense out_proj_;
};

// Decoder-shaped stack with residual attention, flattened into one score.
class Discriminator {
public:
    Discriminator(const ModelConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& z, bool training);  // [K,tau,latent] -> [K] in (0,1)
    void params(ParamList& out, const std::string& prefix);
    void buffers(ParamList& out, const std::string& prefix);
    Dense& head() { return head_; }

private:
    ModelConfig cfg_;
    std::vector<GraphAttentionLayer> spatial_, temporal_;
    std::unique_ptr<ResidualFFN> ffn_;
    Dense head_;
};

class GatGanModel {
public:
    explicit GatGanModel(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    Tensor encode(const Tensor& x, bool training);
    Tensor decode(const Tensor& z, bool training);
    Tensor discriminate(const Tensor& z, bool training);

    Tensor sample_prior(std::size_t k, Rng& rng) const;  // i.i.d. N(0,1) latents
    // decode(sample_prior(k)) in eval mode.
    Tensor generate(std::size_t k, Rng& rng);
    // Alternative pipeline: perturb real sequences, encode, decode.
    Tensor regenerate(const Tensor& x, Rng& rng);

    ParamList encoder_params();
    ParamList decoder_params();
    ParamList discriminator_params();
    ParamList all_params();
    ParamList all_buffers();
    std::size_t param_count();

    // Extra power-iteration steps on every spectral kernel (pre-checkpoint).
    void refine_spectral_estimates(int iters = 30);

    std::size_t epochs_trained = 0;

    Encoder& encoder() { return *encoder_; }
    Decoder& decoder() { return *decoder_; }
    Discriminator& discriminator() { return *discriminator_; }

private:
    ModelConfig cfg_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<Decoder> decoder_;
    std::unique_ptr<Discriminator> discriminator_;
};

}  // namespace gatgan
