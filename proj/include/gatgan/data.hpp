#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gatgan/rng.hpp"
#include "gatgan/tensor.hpp"

namespace gatgan {

// A full multivariate series: rows are time steps, columns are features.
struct RawSeries {
    std::vector<double> values;  // row-major [steps x features]
    std::size_t steps = 0;
    std::size_t features = 0;
    std::vector<std::string> feature_names;
    std::string source_path;
    std::size_t dropped_rows = 0;  // rows removed because they held NaN

    double at(std::size_t t, std::size_t f) const { return values[t * features + f]; }
    double& at(std::size_t t, std::size_t f) { return values[t * features + f]; }
};

enum class HeaderMode { automatic, always, never };

// Parse a CSV body: rectangular numeric rows, optional header line. Rows
// containing NaN are dropped and counted; ragged rows and non-numeric cells
// raise ParseError naming the line.
RawSeries parse_csv_text(const std::string& text, HeaderMode header,
                         const std::string& origin);
RawSeries load_csv(const std::string& path, HeaderMode header = HeaderMode::automatic);

// Serialize [K,T,F] windows as one CSV body of K*T rows (windows stacked
// along time), with a header of feature names.
std::string to_csv(const Tensor& windows, const std::vector<std::string>& feature_names);

struct NormalizationParams {
    std::vector<double> min, max;    // per feature
    std::vector<bool> degenerate;    // true where max == min

    std::size_t features() const { return min.size(); }
};

// Per-feature (v - min) / (max - min); constant features map to 0.5.
std::pair<RawSeries, NormalizationParams> minmax_normalize(const RawSeries& x);

// Apply existing statistics to another series, clamping into [0,1] so that
// out-of-range values cannot break downstream unit-range contracts.
RawSeries normalize_with(const RawSeries& x, const NormalizationParams& params);

// Inverse affine map per feature on a [K,T,F] batch.
Tensor denormalize(const Tensor& batch, const NormalizationParams& params);

// JSON sidecar for the normalization statistics.
std::string params_to_json(const NormalizationParams& params,
                           const std::vector<std::string>& feature_names);
NormalizationParams params_from_json(const std::string& text);

struct WindowedDataset {
    Tensor windows;  // [K, tau, F], every element in [0,1]
    std::size_t tau = 0;
    std::size_t stride = 1;
    NormalizationParams params;
    std::string split_tag = "full";
    std::vector<std::size_t> start_indices;  // source time step of each window

    std::size_t count() const { return windows.shape().empty() ? 0 : windows.shape()[0]; }
};

// Slide a window of length tau with the given stride over a unit-range
// series: K = floor((T - tau)/stride) + 1 windows.
WindowedDataset window(const RawSeries& normalized, std::size_t tau, std::size_t stride,
                       NormalizationParams params);

enum class SplitMode { chronological, shuffled };

// Chronological: the first share of windows trains, windows that straddle the
// time boundary are dropped, and every test window starts at or after it.
// Shuffled: seeded permutation split (window overlap may leak across sides).
std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& ds,
                                                  double train_frac, SplitMode mode,
                                                  std::uint64_t seed);

enum class ToyKind { coupled_sines, ar_process };

// Synthetic benchmark data, already normalized and windowed at stride = tau.
// coupled_sines: one shared oscillation where feature j trails feature 0 by
// exactly 2*j samples (plus a harmonic), so features correlate at a fixed
// lag. ar_process: first-order vector autoregression with a fixed coupling
// matrix. Deterministic under seed.
WindowedDataset toy_generator(ToyKind kind, std::size_t k, std::size_t tau,
                              std::size_t f, double noise, std::uint64_t seed);

}  // namespace gatgan
