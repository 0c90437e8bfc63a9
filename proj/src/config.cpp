#include "gatgan/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "gatgan/errors.hpp"

namespace gatgan {

const std::vector<std::string> kVariants = {
    "full",
    "no_decoder",
    "no_spatial_attention",
    "no_temporal_attention",
    "no_encoder_conv",
    "no_reconstruction_loss",
};

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t r = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs an unsigned integer, got '" + v + "'");
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs a number, got '" + v + "'");
    }
}

std::string format_f64(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

TrainingConfig base_training(const RunConfig& c) {
    TrainingConfig t;
    t.batch_size = c.batch_size;
    t.epochs = c.epochs;
    t.lr_encoder = c.lr_encoder;
    t.lr_decoder = c.lr_decoder;
    t.lr_discriminator = c.lr_discriminator;
    t.beta1 = c.beta1;
    t.beta2 = c.beta2;
    t.adam_eps = c.adam_eps;
    t.flip_prob = c.flip_prob;
    t.noise_std = c.noise_std;
    t.lambda_r = c.lambda_r;
    t.seed = c.seed;
    t.log_every = c.log_every;
    t.checkpoint_every = c.checkpoint_every;
    return t;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"data", [](RunConfig& c, const std::string&, const std::string& v) { c.data = v; }},
        {"header",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v != "auto" && v != "always" && v != "never") {
                 throw ConfigError("config key '" + k + "' must be auto, always or never");
             }
             c.header = v;
         }},
        {"tau", [](RunConfig& c, const std::string& k, const std::string& v) { c.tau = parse_u64(k, v); }},
        {"stride", [](RunConfig& c, const std::string& k, const std::string& v) { c.stride = parse_u64(k, v); }},
        {"toy_windows", [](RunConfig& c, const std::string& k, const std::string& v) { c.toy_windows = parse_u64(k, v); }},
        {"toy_features", [](RunConfig& c, const std::string& k, const std::string& v) { c.toy_features = parse_u64(k, v); }},
        {"toy_noise", [](RunConfig& c, const std::string& k, const std::string& v) { c.toy_noise = parse_f64(k, v); }},
        {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
        {"variant",
         [](RunConfig& c, const std::string&, const std::string& v) {
             ModelConfig m;
             TrainingConfig t;
             apply_variant(v, m, t);  // validates the name
             c.variant = v;
         }},
        {"latent", [](RunConfig& c, const std::string& k, const std::string& v) { c.latent = parse_u64(k, v); }},
        {"attention_pairs", [](RunConfig& c, const std::string& k, const std::string& v) { c.attention_pairs = parse_u64(k, v); }},
        {"ffn_depth", [](RunConfig& c, const std::string& k, const std::string& v) { c.ffn_depth = parse_u64(k, v); }},
        {"conv_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.conv_width = parse_u64(k, v); }},
        {"slope", [](RunConfig& c, const std::string& k, const std::string& v) { c.slope = parse_f64(k, v); }},
        {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_u64(k, v); }},
        {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_u64(k, v); }},
        {"lr_encoder", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr_encoder = parse_f64(k, v); }},
        {"lr_decoder", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr_decoder = parse_f64(k, v); }},
        {"lr_discriminator", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr_discriminator = parse_f64(k, v); }},
        {"beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta1 = parse_f64(k, v); }},
        {"beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta2 = parse_f64(k, v); }},
        {"adam_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.adam_eps = parse_f64(k, v); }},
        {"flip_prob", [](RunConfig& c, const std::string& k, const std::string& v) { c.flip_prob = parse_f64(k, v); }},
        {"noise_std", [](RunConfig& c, const std::string& k, const std::string& v) { c.noise_std = parse_f64(k, v); }},
        {"lambda_r", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda_r = parse_f64(k, v); }},
        {"log_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.log_every = parse_u64(k, v); }},
        {"checkpoint_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.checkpoint_every = parse_u64(k, v); }},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
        {"runs", [](RunConfig& c, const std::string& k, const std::string& v) { c.runs = parse_u64(k, v); }},
        {"horizon", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon = parse_u64(k, v); }},
        {"forecast_hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.forecast_hidden = parse_u64(k, v); }},
        {"forecast_layers", [](RunConfig& c, const std::string& k, const std::string& v) { c.forecast_layers = parse_u64(k, v); }},
        {"forecast_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.forecast_epochs = parse_u64(k, v); }},
        {"forecast_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.forecast_lr = parse_f64(k, v); }},
        {"embed_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_dim = parse_u64(k, v); }},
        {"embed_heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_heads = parse_u64(k, v); }},
        {"embed_blocks", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_blocks = parse_u64(k, v); }},
        {"embed_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_epochs = parse_u64(k, v); }},
        {"embed_batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_batch = parse_u64(k, v); }},
        {"embed_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_lr = parse_f64(k, v); }},
        {"embed_val_frac", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_val_frac = parse_f64(k, v); }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    it->second(*this, key, value);
}

void RunConfig::apply_override(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    apply(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "adam_eps = " << format_f64(adam_eps) << "\n"
       << "attention_pairs = " << attention_pairs << "\n"
       << "batch_size = " << batch_size << "\n"
       << "beta1 = " << format_f64(beta1) << "\n"
       << "beta2 = " << format_f64(beta2) << "\n"
       << "checkpoint_every = " << checkpoint_every << "\n"
       << "conv_width = " << conv_width << "\n"
       << "data = " << data << "\n"
       << "embed_batch = " << embed_batch << "\n"
       << "embed_blocks = " << embed_blocks << "\n"
       << "embed_dim = " << embed_dim << "\n"
       << "embed_epochs = " << embed_epochs << "\n"
       << "embed_heads = " << embed_heads << "\n"
       << "embed_lr = " << format_f64(embed_lr) << "\n"
       << "embed_val_frac = " << format_f64(embed_val_frac) << "\n"
       << "epochs = " << epochs << "\n"
       << "ffn_depth = " << ffn_depth << "\n"
       << "flip_prob = " << format_f64(flip_prob) << "\n"
       << "forecast_epochs = " << forecast_epochs << "\n"
       << "forecast_hidden = " << forecast_hidden << "\n"
       << "forecast_layers = " << forecast_layers << "\n"
       << "forecast_lr = " << format_f64(forecast_lr) << "\n"
       << "header = " << header << "\n"
       << "horizon = " << horizon << "\n"
       << "lambda_r = " << format_f64(lambda_r) << "\n"
       << "latent = " << latent << "\n"
       << "log_every = " << log_every << "\n"
       << "lr_decoder = " << format_f64(lr_decoder) << "\n"
       << "lr_discriminator = " << format_f64(lr_discriminator) << "\n"
       << "lr_encoder = " << format_f64(lr_encoder) << "\n"
       << "noise_std = " << format_f64(noise_std) << "\n"
       << "out = " << out << "\n"
       << "runs = " << runs << "\n"
       << "seed = " << seed << "\n"
       << "slope = " << format_f64(slope) << "\n"
       << "stride = " << stride << "\n"
       << "tau = " << tau << "\n"
       << "toy_features = " << toy_features << "\n"
       << "toy_noise = " << format_f64(toy_noise) << "\n"
       << "toy_windows = " << toy_windows << "\n"
       << "variant = " << variant << "\n";
    return os.str();
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + t + "'");
        }
        try {
            cfg.apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_text(buf.str(), path);
}

ModelConfig RunConfig::model_config(std::size_t features) const {
    ModelConfig m;
    m.tau = tau;
    m.features = features;
    m.latent = latent;
    m.attention_pairs = attention_pairs;
    m.ffn_depth = ffn_depth;
    m.conv_width = conv_width;
    m.noise_std = noise_std;
    m.slope = slope;
    m.seed = seed;
    TrainingConfig t = base_training(*this);
    apply_variant(variant, m, t);
    return m;
}

TrainingConfig RunConfig::training_config() const {
    ModelConfig m;
    TrainingConfig t = base_training(*this);
    apply_variant(variant, m, t);
    return t;
}

EmbedderConfig RunConfig::embedder_config() const {
    EmbedderConfig e;
    e.d_model = embed_dim;
    e.heads = embed_heads;
    e.blocks = embed_blocks;
    e.epochs = embed_epochs;
    e.batch_size = embed_batch;
    e.lr = embed_lr;
    e.val_frac = embed_val_frac;
    e.seed = seed;
    return e;
}

ForecastConfig RunConfig::forecast_config() const {
    ForecastConfig f;
    f.hidden = forecast_hidden;
    f.layers = forecast_layers;
    f.horizon = horizon;
    f.epochs = forecast_epochs;
    f.batch_size = batch_size;
    f.lr = forecast_lr;
    f.seed = seed;
    return f;
}

HeaderMode RunConfig::header_mode() const {
    if (header == "always") return HeaderMode::always;
    if (header == "never") return HeaderMode::never;
    return HeaderMode::automatic;
}

void RunConfig::require_resolved(bool needs_data, bool needs_out) const {
    if (needs_data && data.empty()) {
        throw ConfigError("config field 'data' is unresolved: no dataset given");
    }
    if (needs_out && out.empty()) {
        throw ConfigError("config field 'out' is unresolved: no output location given");
    }
}

void apply_variant(const std::string& name, ModelConfig& model, TrainingConfig& training) {
    if (name == "full") {
        return;
    } else if (name == "no_decoder") {
        model.affine_decoder = true;
    } else if (name == "no_spatial_attention") {
        model.use_spatial = false;
    } else if (name == "no_temporal_attention") {
        model.use_temporal = false;
    } else if (name == "no_encoder_conv") {
        model.use_encoder_conv = false;
    } else if (name == "no_reconstruction_loss") {
        training.skip_reconstruction_phase = true;
        training.lambda_r = 0.0;
    } else {
        std::string valid;
        for (const auto& v : kVariants) {
            if (!valid.empty()) valid += ", ";
            valid += v;
        }
        throw ConfigError("unknown variant '" + name + "'; valid variants: " + valid);
    }
}

}  // namespace gatgan
