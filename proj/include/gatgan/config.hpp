#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gatgan/data.hpp"
#include "gatgan/metrics.hpp"
#include "gatgan/model.hpp"
#include "gatgan/training.hpp"

namespace gatgan {

// The six model variants exercised by the ablation study. "full" is the
// unmodified model; the others disable one ingredient each.
extern const std::vector<std::string> kVariants;

// Flat key=value run description: data source, output directory, model
// width knobs, training schedule, evaluation budget. File values are
// overridden by later apply() calls (the CLI maps every flag onto one),
// and the fully resolved view serializes back to text for provenance.
struct RunConfig {
    // data source: a CSV path, or "toy:coupled_sines" / "toy:ar_process"
    std::string data;
    std::string header = "auto";  // auto | always | never
    std::size_t tau = 64;
    std::size_t stride = 0;  // 0: non-overlapping windows (stride = tau)
    std::size_t toy_windows = 128;
    std::size_t toy_features = 5;
    double toy_noise = 0.02;

    // outputs
    std::string out;

    // model
    std::string variant = "full";
    std::size_t latent = 16;
    std::size_t attention_pairs = 2;
    std::size_t ffn_depth = 2;
    std::size_t conv_width = 3;
    double slope = 0.2;

    // training
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    double lr_encoder = 2e-2;
    double lr_decoder = 2e-2;
    double lr_discriminator = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double flip_prob = 0.05;
    double noise_std = 0.1;
    double lambda_r = 5.0;
    std::size_t log_every = 10;
    std::size_t checkpoint_every = 50;
    std::uint64_t seed = 99;

    // evaluation
    std::size_t runs = 10;
    std::size_t horizon = 8;
    std::size_t forecast_hidden = 64;
    std::size_t forecast_layers = 2;
    std::size_t forecast_epochs = 300;
    double forecast_lr = 1e-3;

    // embedder
    std::size_t embed_dim = 16;
    std::size_t embed_heads = 2;
    std::size_t embed_blocks = 1;
    std::size_t embed_epochs = 200;
    std::size_t embed_batch = 64;
    double embed_lr = 1e-3;
    double embed_val_frac = 0.1;

    // Sets one field from its key name; unknown keys and unparseable
    // values raise ConfigError naming the key.
    void apply(const std::string& key, const std::string& value);
    // Applies a "key=value" override string.
    void apply_override(const std::string& assignment);

    // Every key in sorted order; parse(to_text()) round-trips exactly.
    std::string to_text() const;

    static RunConfig from_text(const std::string& text, const std::string& origin);
    static RunConfig from_file(const std::string& path);

    // Typed views. The variant switches are folded in, so a
    // no_reconstruction_loss run really skips phase 1.
    ModelConfig model_config(std::size_t features) const;
    TrainingConfig training_config() const;
    EmbedderConfig embedder_config() const;
    ForecastConfig forecast_config() const;
    HeaderMode header_mode() const;

    // Fields that must be set before a run can start; throws ConfigError
    // naming the first unresolved field.
    void require_resolved(bool needs_data, bool needs_out) const;
};

// Folds a variant name into the model/training configuration; unknown
// names raise ConfigError listing the valid ones.
void apply_variant(const std::string& name, ModelConfig& model, TrainingConfig& training);

}  // namespace gatgan
