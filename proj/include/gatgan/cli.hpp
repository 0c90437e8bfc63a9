#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace gatgan::cli {

// Stable exit-code contract for scripting.
inline constexpr int kOk = 0;
inline constexpr int kUnexpected = 1;
inline constexpr int kUsage = 2;
inline constexpr int kDiverged = 3;

// Configuration file plus ordered key=value overrides; later entries win.
struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

// Trains the model on the configured dataset. Writes into the output
// directory: resolved config snapshot, normalization sidecar, loss log,
// best/last checkpoints.
int cmd_train(const CommonArgs& args, std::ostream& out, std::ostream& err);

struct GenerateArgs {
    std::string checkpoint;
    std::string out_csv;
    std::size_t count = 16;
    std::uint64_t seed = 1;
    std::string mode = "prior";  // prior | reconstruct
    std::string data;            // source series, reconstruct mode only
    std::string header = "auto";
};

// Samples synthetic sequences from a trained checkpoint and writes them
// as CSV (denormalized when the training sidecar sits next to the
// checkpoint) plus a JSON manifest.
int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
    std::string metric;  // ftd | predictive | both
    std::string real_csv;
    std::string synthetic_csv;
    std::string embedder_checkpoint;  // required for ftd / both
    std::string out_prefix;           // writes <prefix>.csv/.json when set
    CommonArgs common;
};

// Scores synthetic data against real data, repeating with distinct seeds
// and reporting mean and standard deviation per metric.
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

struct AblateArgs {
    std::vector<std::string> variants;  // empty: all six
    CommonArgs common;
};

// Trains and scores every requested variant on a shared data and seed
// schedule, then reports per-variant distance and forecasting quality plus
// the correlation between the two metric columns.
int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream& err);

// Fits the evaluation embedder on the configured dataset and writes its
// checkpoint and validation-MSE log.
int cmd_train_embedder(const CommonArgs& args, std::ostream& out, std::ostream& err);

}  // namespace gatgan::cli
