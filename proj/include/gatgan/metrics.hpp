#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gatgan/data.hpp"
#include "gatgan/layers.hpp"
#include "gatgan/tensor.hpp"

namespace gatgan {

// First two moments of a point cloud in embedding space.
struct GaussianMoments {
    std::vector<double> mean;  // d
    std::vector<double> cov;   // row-major d x d, unbiased sample covariance

    std::size_t dim() const { return mean.size(); }
};

// Sample mean and unbiased covariance of [K,d] embeddings; K >= 2 required.
GaussianMoments fit_moments(const Tensor& embeddings);

// Squared Frechet (2-Wasserstein) distance between two Gaussians:
// |mu_a - mu_b|^2 + Tr(Ca) + Tr(Cb) - 2 Tr sqrt(sqrt(Ca) Cb sqrt(Ca)).
// Negative eigenvalues of the symmetrized product are clamped to zero.
double frechet_distance(const GaussianMoments& a, const GaussianMoments& b);

struct EmbedderConfig {
    std::size_t d_model = 16;
    std::size_t heads = 2;
    std::size_t blocks = 1;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    double val_frac = 0.1;  // held-out share of real windows
    std::uint64_t seed = 7;

    void validate() const;
};

struct EmbedderTrainResult {
    TransformerEmbedder embedder;
    std::vector<double> train_mse;  // per epoch
    std::vector<double> val_mse;    // per epoch, on the held-out share
};

// Fit the embedder as a next-step regressor on real windows: the first
// tau-1 steps predict the final step. The regression head is used for
// training and validation only; embed() output excludes it.
EmbedderTrainResult train_embedder(const WindowedDataset& real, const EmbedderConfig& cfg);

// Distance between Gaussian fits of embedded real and synthetic batches.
// Both batches are truncated to a common count so moment estimation is
// symmetric.
double ftd_score(const Tensor& real, const Tensor& synthetic, TransformerEmbedder& embedder);

struct ForecastConfig {
    std::size_t hidden = 64;
    std::size_t layers = 2;
    std::size_t horizon = 8;  // p: steps predicted after the context
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 11;

    void validate() const;
};

// Teacher-forced next-step training of the forecaster on [K,T,F] sequences.
LstmStack train_forecaster(const Tensor& sequences, const ForecastConfig& cfg);

// Mean absolute error of a free rollout: the first tau-p steps of each test
// sequence are context; the model predicts the last p. Normalized per
// element (divided by K*p*F).
double forecast_mae(LstmStack& model, const Tensor& real_test, std::size_t p);

// Train-on-synthetic, test-on-real forecasting score. Sequences are brought
// into a canonical content order first, so the score is invariant to the
// row order of both datasets.
double predictive_score(const WindowedDataset& real_test,
                        const WindowedDataset& synthetic_train, std::size_t p,
                        const ForecastConfig& cfg);

// Sample Pearson correlation; lengths must match, be >= 2, and have nonzero
// variance on both sides.
double pearson_corr(const std::vector<double>& xs, const std::vector<double>& ys);

// Mean and population standard deviation over repeated runs; one run yields
// std 0.
std::pair<double, double> aggregate_runs(const std::vector<double>& scores);

struct EvalCell {
    std::string dataset;
    std::size_t tau = 0;
    std::string variant;
    std::string metric;  // "ftd" or "predictive_mae"
    double mean = 0.0;
    double std = 0.0;
    std::size_t n_runs = 0;
};

struct EvalReport {
    std::vector<EvalCell> cells;

    std::string to_csv() const;   // dataset,tau,variant,metric,mean,std,n_runs
    std::string to_json() const;  // nested dataset -> tau -> variant -> metric
};

}  // namespace gatgan
