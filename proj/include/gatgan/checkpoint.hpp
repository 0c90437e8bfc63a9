#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gatgan/layers.hpp"
#include "gatgan/metrics.hpp"
#include "gatgan/model.hpp"

namespace gatgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// One named, shaped 64-bit float array inside a checkpoint.
struct SavedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

// In-memory image of the on-disk container. The file starts with a fixed
// magic, a version word and a JSON header (kind, configuration, array
// layout, payload digest), followed by the raw little-endian arrays.
// Serialization is canonical: save(load(path)) reproduces the bytes of
// path exactly.
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string kind;         // "gatgan" or "embedder"
    std::string config_json;  // canonical JSON of the producing configuration
    std::vector<SavedArray> arrays;
    std::string rng_state;    // producing run's generator state ("" if none)
    std::uint64_t epochs_trained = 0;
};

// FNV-1a over the little-endian value bytes of every array in order.
std::uint64_t checkpoint_payload_digest(const Checkpoint& ckpt);

// Write/read the container. load verifies magic, version and payload
// digest and throws CheckpointError naming the failing section; nothing
// is partially returned.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Typed configuration <-> canonical JSON helpers.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);
std::string embedder_config_to_json(const EmbedderConfig& cfg, std::size_t features);
EmbedderConfig embedder_config_from_json(const std::string& text, std::size_t& features_out);

// Snapshot every parameter and buffer of the model (sorted by name).
// Spectral estimates are not refined here; callers that want certified
// kernels run model.refine_spectral_estimates() first.
Checkpoint snapshot_model(GatGanModel& model, const std::string& rng_state = "");

// Rebuild a model from its snapshot: the configuration reconstructs the
// architecture, then every named array overwrites the fresh weights.
// Unknown, missing or misshaped arrays raise CheckpointError.
GatGanModel restore_model(const Checkpoint& ckpt);

Checkpoint snapshot_embedder(TransformerEmbedder& embedder, const EmbedderConfig& cfg,
                             std::size_t features, const std::string& rng_state = "");
TransformerEmbedder restore_embedder(const Checkpoint& ckpt);
TransformerEmbedder restore_embedder(const Checkpoint& ckpt, EmbedderConfig& cfg_out,
                                     std::size_t& features_out);

}  // namespace gatgan
