#include "gatgan/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gatgan/digest.hpp"
#include "gatgan/errors.hpp"

#include "json.hpp"

namespace gatgan {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'G', 'G', 'C', 'P'};

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
}

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
}

std::uint32_t read_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::string payload_bytes(const Checkpoint& ckpt) {
    std::size_t total = 0;
    for (const auto& a : ckpt.arrays) total += a.values.size();
    std::string out;
    out.reserve(total * 8);
    for (const auto& a : ckpt.arrays) {
        for (double d : a.values) {
            append_u64_le(out, std::bit_cast<std::uint64_t>(d));
        }
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

json parse_header(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
}

template <typename T>
T header_field(const json& h, const char* key) {
    if (!h.contains(key)) {
        throw CheckpointError(std::string("checkpoint header missing field '") + key + "'");
    }
    try {
        return h.at(key).get<T>();
    } catch (const std::exception&) {
        throw CheckpointError(std::string("checkpoint header field '") + key +
                              "' has the wrong type");
    }
}

template <typename T>
T config_field(const json& cfg, const char* key) {
    if (!cfg.contains(key)) {
        throw CheckpointError(std::string("checkpoint config missing field '") + key + "'");
    }
    try {
        return cfg.at(key).get<T>();
    } catch (const std::exception&) {
        throw CheckpointError(std::string("checkpoint config field '") + key +
                              "' has the wrong type");
    }
}

json parse_config(const std::string& text, const char* what) {
    try {
        return json::parse(text.empty() ? "{}" : text);
    } catch (const std::exception& e) {
        throw CheckpointError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

// Copies every saved array into the matching named tensor; every tensor
// must be covered exactly once.
void fill_named_tensors(const Checkpoint& ckpt, ParamList& targets) {
    std::unordered_map<std::string, Tensor*> by_name;
    for (auto& p : targets) {
        if (!by_name.emplace(p.name, &p.tensor).second) {
            throw CheckpointError("model exposes duplicate tensor name '" + p.name + "'");
        }
    }
    std::unordered_set<std::string> covered;
    for (const auto& a : ckpt.arrays) {
        auto it = by_name.find(a.name);
        if (it == by_name.end()) {
            throw CheckpointError("checkpoint array '" + a.name +
                                  "' does not match any model tensor");
        }
        Tensor& t = *it->second;
        if (a.shape != t.shape() || a.values.size() != t.size()) {
            throw CheckpointError("checkpoint array '" + a.name + "' has the wrong shape");
        }
        std::copy(a.values.begin(), a.values.end(), t.values_mut().begin());
        covered.insert(a.name);
    }
    for (const auto& p : targets) {
        if (!covered.count(p.name)) {
            throw CheckpointError("checkpoint is missing array '" + p.name + "'");
        }
    }
}

Checkpoint snapshot_named_tensors(std::string kind, std::string config_json,
                                  const ParamList& source, std::uint64_t epochs,
                                  std::string rng_state) {
    Checkpoint ckpt;
    ckpt.kind = std::move(kind);
    ckpt.config_json = std::move(config_json);
    ckpt.rng_state = std::move(rng_state);
    ckpt.epochs_trained = epochs;
    std::unordered_set<std::string> seen;
    for (const auto& p : source) {
        if (!seen.insert(p.name).second) {
            throw ContractError("duplicate tensor name '" + p.name + "' in snapshot");
        }
        SavedArray a;
        a.name = p.name;
        a.shape = p.tensor.shape();
        auto vals = p.tensor.values();
        a.values.assign(vals.begin(), vals.end());
        ckpt.arrays.push_back(std::move(a));
    }
    std::sort(ckpt.arrays.begin(), ckpt.arrays.end(),
              [](const SavedArray& a, const SavedArray& b) { return a.name < b.name; });
    return ckpt;
}

}  // namespace

std::uint64_t checkpoint_payload_digest(const Checkpoint& ckpt) {
    const std::string payload = payload_bytes(ckpt);
    return fnv1a(payload.data(), payload.size());
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const std::string payload = payload_bytes(ckpt);

    json header;
    header["kind"] = ckpt.kind;
    header["config"] = parse_config(ckpt.config_json, "checkpoint config");
    header["epochs_trained"] = ckpt.epochs_trained;
    header["rng_state"] = ckpt.rng_state;
    header["payload_digest"] = fnv1a(payload.data(), payload.size());
    json arrays = json::array();
    for (const auto& a : ckpt.arrays) {
        json entry;
        entry["name"] = a.name;
        entry["shape"] = a.shape;
        entry["count"] = a.values.size();
        arrays.push_back(std::move(entry));
    }
    header["arrays"] = std::move(arrays);
    const std::string header_text = header.dump();

    std::string out;
    out.reserve(16 + header_text.size() + payload.size());
    out.append(kMagic, 4);
    append_u32_le(out, ckpt.version);
    append_u64_le(out, static_cast<std::uint64_t>(header_text.size()));
    out += header_text;
    out += payload;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("short write to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    const std::string data = buf.str();
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());

    if (data.size() < 16) throw CheckpointError("truncated checkpoint: missing prologue");
    if (std::memcmp(data.data(), kMagic, 4) != 0) {
        throw CheckpointError("not a checkpoint container (bad magic)");
    }
    const std::uint32_t version = read_u32_le(bytes + 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (this build reads version " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint64_t header_len = read_u64_le(bytes + 8);
    if (header_len > data.size() - 16) {
        throw CheckpointError("truncated checkpoint: header extends past end of file");
    }
    const json header = parse_header(data.substr(16, header_len));

    Checkpoint ckpt;
    ckpt.version = version;
    ckpt.kind = header_field<std::string>(header, "kind");
    if (!header.contains("config") || !header.at("config").is_object()) {
        throw CheckpointError("checkpoint header missing field 'config'");
    }
    ckpt.config_json = header.at("config").dump();
    ckpt.epochs_trained = header_field<std::uint64_t>(header, "epochs_trained");
    ckpt.rng_state = header_field<std::string>(header, "rng_state");
    const auto stored_digest = header_field<std::uint64_t>(header, "payload_digest");
    if (!header.contains("arrays") || !header.at("arrays").is_array()) {
        throw CheckpointError("checkpoint header missing field 'arrays'");
    }

    std::size_t total = 0;
    for (const auto& entry : header.at("arrays")) {
        SavedArray a;
        a.name = header_field<std::string>(entry, "name");
        a.shape = header_field<std::vector<std::size_t>>(entry, "shape");
        const auto count = header_field<std::uint64_t>(entry, "count");
        std::size_t from_shape = 1;
        for (std::size_t d : a.shape) from_shape *= d;
        if (count != from_shape) {
            throw CheckpointError("checkpoint array '" + a.name +
                                  "' count disagrees with its shape");
        }
        a.values.resize(count);
        total += count;
        ckpt.arrays.push_back(std::move(a));
    }

    const std::size_t payload_offset = 16 + header_len;
    if (data.size() - payload_offset != total * 8) {
        throw CheckpointError("truncated checkpoint: parameter payload has " +
                              std::to_string(data.size() - payload_offset) +
                              " bytes, expected " + std::to_string(total * 8));
    }
    const unsigned char* p = bytes + payload_offset;
    for (auto& a : ckpt.arrays) {
        for (auto& v : a.values) {
            v = std::bit_cast<double>(read_u64_le(p));
            p += 8;
        }
    }

    const std::uint64_t computed = fnv1a(data.data() + payload_offset, total * 8);
    if (computed != stored_digest) {
        throw CheckpointError("parameter payload digest mismatch: stored " +
                              hex64(stored_digest) + ", computed " + hex64(computed));
    }
    return ckpt;
}

std::string model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["tau"] = cfg.tau;
    j["features"] = cfg.features;
    j["latent"] = cfg.latent;
    j["attention_pairs"] = cfg.attention_pairs;
    j["ffn_depth"] = cfg.ffn_depth;
    j["conv_width"] = cfg.conv_width;
    j["noise_std"] = cfg.noise_std;
    j["slope"] = cfg.slope;
    j["seed"] = cfg.seed;
    j["use_spatial"] = cfg.use_spatial;
    j["use_temporal"] = cfg.use_temporal;
    j["use_encoder_conv"] = cfg.use_encoder_conv;
    j["affine_decoder"] = cfg.affine_decoder;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    const json j = parse_config(text, "model config");
    ModelConfig cfg;
    cfg.tau = config_field<std::size_t>(j, "tau");
    cfg.features = config_field<std::size_t>(j, "features");
    cfg.latent = config_field<std::size_t>(j, "latent");
    cfg.attention_pairs = config_field<std::size_t>(j, "attention_pairs");
    cfg.ffn_depth = config_field<std::size_t>(j, "ffn_depth");
    cfg.conv_width = config_field<std::size_t>(j, "conv_width");
    cfg.noise_std = config_field<double>(j, "noise_std");
    cfg.slope = config_field<double>(j, "slope");
    cfg.seed = config_field<std::uint64_t>(j, "seed");
    cfg.use_spatial = config_field<bool>(j, "use_spatial");
    cfg.use_temporal = config_field<bool>(j, "use_temporal");
    cfg.use_encoder_conv = config_field<bool>(j, "use_encoder_conv");
    cfg.affine_decoder = config_field<bool>(j, "affine_decoder");
    return cfg;
}

std::string embedder_config_to_json(const EmbedderConfig& cfg, std::size_t features) {
    json j;
    j["features"] = features;
    j["d_model"] = cfg.d_model;
    j["heads"] = cfg.heads;
    j["blocks"] = cfg.blocks;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["val_frac"] = cfg.val_frac;
    j["seed"] = cfg.seed;
    return j.dump();
}

EmbedderConfig embedder_config_from_json(const std::string& text, std::size_t& features_out) {
    const json j = parse_config(text, "embedder config");
    EmbedderConfig cfg;
    features_out = config_field<std::size_t>(j, "features");
    cfg.d_model = config_field<std::size_t>(j, "d_model");
    cfg.heads = config_field<std::size_t>(j, "heads");
    cfg.blocks = config_field<std::size_t>(j, "blocks");
    cfg.epochs = config_field<std::size_t>(j, "epochs");
    cfg.batch_size = config_field<std::size_t>(j, "batch_size");
    cfg.lr = config_field<double>(j, "lr");
    cfg.val_frac = config_field<double>(j, "val_frac");
    cfg.seed = config_field<std::uint64_t>(j, "seed");
    return cfg;
}

Checkpoint snapshot_model(GatGanModel& model, const std::string& rng_state) {
    ParamList named = model.all_params();
    ParamList buffers = model.all_buffers();
    named.insert(named.end(), buffers.begin(), buffers.end());
    return snapshot_named_tensors("gatgan", model_config_to_json(model.config()), named,
                                  model.epochs_trained, rng_state);
}

GatGanModel restore_model(const Checkpoint& ckpt) {
    if (ckpt.kind != "gatgan") {
        throw CheckpointError("checkpoint kind '" + ckpt.kind + "' is not a model checkpoint");
    }
    GatGanModel model(model_config_from_json(ckpt.config_json));
    ParamList named = model.all_params();
    ParamList buffers = model.all_buffers();
    named.insert(named.end(), buffers.begin(), buffers.end());
    fill_named_tensors(ckpt, named);
    model.epochs_trained = ckpt.epochs_trained;
    return model;
}

Checkpoint snapshot_embedder(TransformerEmbedder& embedder, const EmbedderConfig& cfg,
                             std::size_t features, const std::string& rng_state) {
    ParamList named;
    embedder.params(named, "embedder");
    return snapshot_named_tensors("embedder", embedder_config_to_json(cfg, features), named,
                                  cfg.epochs, rng_state);
}

TransformerEmbedder restore_embedder(const Checkpoint& ckpt, EmbedderConfig& cfg_out,
                                     std::size_t& features_out) {
    if (ckpt.kind != "embedder") {
        throw CheckpointError("checkpoint kind '" + ckpt.kind +
                              "' is not an embedder checkpoint");
    }
    cfg_out = embedder_config_from_json(ckpt.config_json, features_out);
    Rng rng(cfg_out.seed);
    TransformerEmbedder embedder(features_out, cfg_out.d_model, cfg_out.heads, cfg_out.blocks,
                                 rng);
    ParamList named;
    embedder.params(named, "embedder");
    fill_named_tensors(ckpt, named);
    return embedder;
}

TransformerEmbedder restore_embedder(const Checkpoint& ckpt) {
    EmbedderConfig cfg;
    std::size_t features = 0;
    return restore_embedder(ckpt, cfg, features);
}

}  // namespace gatgan
