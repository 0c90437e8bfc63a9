#include "gatgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "gatgan/errors.hpp"
#include "gatgan/linalg.hpp"
#include "gatgan/training.hpp"
#include "json.hpp"

namespace gatgan {

namespace {

void check_symmetric(const std::vector<double>& m, std::size_t d, const char* what) {
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (std::abs(m[i * d + j] - m[j * d + i]) > 1e-10) {
                throw ContractError(std::string(what) + " covariance is not symmetric");
            }
        }
    }
}

// Copy selected rows of a [K,T,F] batch into a fresh tensor.
Tensor gather_rows(const Tensor& batch, const std::vector<std::size_t>& rows) {
    const std::size_t t = batch.shape()[1], f = batch.shape()[2];
    Tensor out({rows.size(), t, f});
    auto dst = out.values_mut();
    const auto src = batch.values();
    std::size_t idx = 0;
    for (std::size_t r : rows) {
        std::copy(src.begin() + r * t * f, src.begin() + (r + 1) * t * f, dst.begin() + idx);
        idx += t * f;
    }
    return out;
}

// Canonical content order: rows sorted lexicographically by their values, so
// any permutation of the input produces the same training stream.
Tensor sort_rows_canonical(const Tensor& batch) {
    const std::size_t k = batch.shape()[0];
    const std::size_t row = batch.shape()[1] * batch.shape()[2];
    const auto v = batch.values();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(v.begin() + a * row, v.begin() + (a + 1) * row,
                                            v.begin() + b * row, v.begin() + (b + 1) * row);
    });
    return gather_rows(batch, order);
}

double batch_mse(const Tensor& pred, const Tensor& truth) {
    const auto p = pred.values(), t = truth.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
    return acc / static_cast<double>(p.size());
}

}  // namespace

GaussianMoments fit_moments(const Tensor& embeddings) {
    if (embeddings.rank() != 2) {
        throw DimensionError("moment fitting expects [K,d], got " +
                             shape_str(embeddings.shape()));
    }
    const std::size_t k = embeddings.shape()[0], d = embeddings.shape()[1];
    if (k < 2) throw ContractError("need at least 2 embeddings to fit a covariance");

    GaussianMoments m;
    m.mean.assign(d, 0.0);
    m.cov.assign(d * d, 0.0);
    const auto v = embeddings.values();
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += v[i * d + j];
    }
    for (double& x : m.mean) x /= static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            const double da = v[i * d + a] - m.mean[a];
            for (std::size_t b = a; b < d; ++b) {
                m.cov[a * d + b] += da * (v[i * d + b] - m.mean[b]);
            }
        }
    }
    const double scale = 1.0 / static_cast<double>(k - 1);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            m.cov[a * d + b] *= scale;
            m.cov[b * d + a] = m.cov[a * d + b];
        }
    }
    return m;
}

double frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
    const std::size_t d = a.dim();
    if (d == 0 || b.dim() != d) {
        throw DimensionError("moment dimensions disagree: " + std::to_string(d) + " vs " +
                             std::to_string(b.dim()));
    }
    check_symmetric(a.cov, d, "first");
    check_symmetric(b.cov, d, "second");

    double mean_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a.mean[i] - b.mean[i];
        mean_sq += diff * diff;
    }

    // Tr sqrt(sqrt(Ca) Cb sqrt(Ca)) via the eigenvalues of the symmetrized
    // product; tiny negative eigenvalues are numerical noise and clamp to 0.
    const std::vector<double> sqrt_a = linalg::sqrtm_psd(a.cov, d);
    std::vector<double> prod = linalg::matmul_square(
        linalg::matmul_square(sqrt_a, b.cov, d), sqrt_a, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double avg = 0.5 * (prod[i * d + j] + prod[j * d + i]);
            prod[i * d + j] = prod[j * d + i] = avg;
        }
    }
    const linalg::SymEig eig = linalg::sym_eig(std::move(prod), d);
    double tr_sqrt = 0.0;
    for (double lambda : eig.eigenvalues) tr_sqrt += std::sqrt(std::max(lambda, 0.0));

    const double dist = mean_sq + linalg::trace(a.cov, d) + linalg::trace(b.cov, d) -
                        2.0 * tr_sqrt;
    return std::max(dist, 0.0);
}

void EmbedderConfig::validate() const {
    if (d_model == 0 || heads == 0 || blocks == 0) {
        throw ConfigError("embedder dimensions must be >= 1");
    }
    if (d_model % heads != 0) throw ConfigError("embedder width must divide across heads");
    if (batch_size == 0) throw ConfigError("embedder batch size must be >= 1");
    if (lr < 0) throw ConfigError("embedder learning rate must be >= 0");
    if (!(val_frac > 0.0 && val_frac < 1.0)) {
        throw ConfigError("validation fraction must lie strictly between 0 and 1");
    }
}

EmbedderTrainResult train_embedder(const WindowedDataset& real, const EmbedderConfig& cfg) {
    cfg.validate();
    if (real.tau < 2) throw ContractError("next-step embedder training needs tau >= 2");
    const std::size_t k = real.count();
    if (k < 2) throw ContractError("need at least 2 windows to split off validation data");
    const std::size_t tau = real.tau, f = real.windows.shape()[2];

    Rng root(cfg.seed);
    Rng rng_init = root.stream(1);
    Rng rng_split = root.stream(2);
    Rng rng_shuffle = root.stream(3);

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng_split.shuffle(order);
    const auto val_target =
        static_cast<std::size_t>(std::llround(cfg.val_frac * static_cast<double>(k)));
    const std::size_t val_count = std::clamp<std::size_t>(val_target, 1, k - 1);
    std::vector<std::size_t> val_rows(order.begin(), order.begin() + val_count);
    std::vector<std::size_t> train_rows(order.begin() + val_count, order.end());

    Tensor train = gather_rows(real.windows, train_rows);
    Tensor val = gather_rows(real.windows, val_rows);
    Tensor val_ctx = slice_axis(val, 1, 0, tau - 1);
    Tensor val_target_t = reshape(slice_axis(val, 1, tau - 1, 1), {val_rows.size(), f});

    EmbedderTrainResult result{TransformerEmbedder(f, cfg.d_model, cfg.heads, cfg.blocks,
                                                   rng_init),
                               {}, {}};
    ParamList params;
    result.embedder.params(params, "embedder");
    Adam opt(params, cfg.lr);

    std::vector<std::size_t> idx(train_rows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng_shuffle.shuffle(idx);
        double epoch_mse = 0.0;
        std::size_t batches = 0;
        for (std::size_t off = 0; off < idx.size(); off += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, idx.size() - off);
            std::vector<std::size_t> rows(idx.begin() + off, idx.begin() + off + b);
            Tensor batch = gather_rows(train, rows);
            Tensor ctx = slice_axis(batch, 1, 0, tau - 1);
            Tensor target = reshape(slice_axis(batch, 1, tau - 1, 1), {b, f});

            Tape tape;
            Tensor pred = result.embedder.predict_next(ctx);
            Tensor diff = sub(pred, target);
            Tensor loss = mean(mul(diff, diff));
            epoch_mse += loss.item();
            ++batches;
            tape.backward(loss);
            opt.step();
        }
        result.train_mse.push_back(epoch_mse / static_cast<double>(batches));
        result.val_mse.push_back(batch_mse(result.embedder.predict_next(val_ctx), val_target_t));
    }
    return result;
}

double ftd_score(const Tensor& real, const Tensor& synthetic, TransformerEmbedder& embedder) {
    if (real.rank() != 3 || synthetic.rank() != 3) {
        throw DimensionError("distance scoring expects [K,T,F] batches");
    }
    if (real.shape()[1] != synthetic.shape()[1] || real.shape()[2] != synthetic.shape()[2]) {
        throw DimensionError("batches disagree beyond count: " + shape_str(real.shape()) +
                             " vs " + shape_str(synthetic.shape()));
    }
    const std::size_t n = std::min(real.shape()[0], synthetic.shape()[0]);
    if (n < 2) throw ContractError("need at least 2 sequences per side");

    std::vector<std::size_t> head(n);
    std::iota(head.begin(), head.end(), std::size_t{0});
    Tensor er = embedder.embed(gather_rows(real, head));
    Tensor es = embedder.embed(gather_rows(synthetic, head));
    return frechet_distance(fit_moments(er), fit_moments(es));
}

void ForecastConfig::validate() const {
    if (hidden == 0 || layers == 0) throw ConfigError("forecaster dimensions must be >= 1");
    if (horizon == 0) throw ConfigError("forecast horizon must be >= 1");
    if (batch_size == 0) throw ConfigError("forecaster batch size must be >= 1");
    if (lr < 0) throw ConfigError("forecaster learning rate must be >= 0");
}

LstmStack train_forecaster(const Tensor& sequences, const ForecastConfig& cfg) {
    cfg.validate();
    if (sequences.rank() != 3) {
        throw DimensionError("forecaster training expects [K,T,F], got " +
                             shape_str(sequences.shape()));
    }
    const std::size_t k = sequences.shape()[0], tau = sequences.shape()[1],
                      f = sequences.shape()[2];
    if (k == 0) throw ContractError("forecaster training set is empty");
    if (tau < 2) throw ContractError("teacher forcing needs tau >= 2");

    Rng root(cfg.seed);
    Rng rng_init = root.stream(1);
    Rng rng_shuffle = root.stream(2);
    LstmStack model(f, cfg.hidden, cfg.layers, rng_init);
    ParamList params;
    model.params(params, "forecaster");
    Adam opt(params, cfg.lr);

    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng_shuffle.shuffle(idx);
        for (std::size_t off = 0; off < k; off += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, k - off);
            std::vector<std::size_t> rows(idx.begin() + off, idx.begin() + off + b);
            Tensor batch = gather_rows(sequences, rows);
            Tensor ctx = slice_axis(batch, 1, 0, tau - 1);
            Tensor target = slice_axis(batch, 1, 1, tau - 1);

            Tape tape;
            Tensor pred = model.forward_seq(ctx);
            Tensor diff = sub(pred, target);
            Tensor loss = mean(mul(diff, diff));
            tape.backward(loss);
            opt.step();
        }
    }
    return model;
}

double forecast_mae(LstmStack& model, const Tensor& real_test, std::size_t p) {
    if (real_test.rank() != 3) {
        throw DimensionError("forecast evaluation expects [K,T,F], got " +
                             shape_str(real_test.shape()));
    }
    const std::size_t tau = real_test.shape()[1];
    if (p == 0) throw ContractError("forecast horizon must be >= 1");
    if (tau <= p) {
        throw ContractError("window length " + std::to_string(tau) +
                            " leaves no context for horizon " + std::to_string(p));
    }
    Tensor ctx = slice_axis(real_test, 1, 0, tau - p);
    Tensor truth = slice_axis(real_test, 1, tau - p, p);
    Tensor pred = model.rollout(ctx, p);
    const auto a = pred.values(), b = truth.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

double predictive_score(const WindowedDataset& real_test,
                        const WindowedDataset& synthetic_train, std::size_t p,
                        const ForecastConfig& cfg) {
    if (real_test.tau != synthetic_train.tau) {
        throw ContractError("real and synthetic window lengths disagree");
    }
    if (real_test.tau <= p) {
        throw ContractError("window length " + std::to_string(real_test.tau) +
                            " must exceed horizon " + std::to_string(p));
    }
    Tensor train = sort_rows_canonical(synthetic_train.windows);
    Tensor test = sort_rows_canonical(real_test.windows);
    ForecastConfig used = cfg;
    used.horizon = p;
    LstmStack model = train_forecaster(train, used);
    return forecast_mae(model, test, p);
}

double pearson_corr(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ContractError("correlation inputs differ in length");
    if (xs.size() < 2) throw ContractError("correlation needs at least 2 points");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ContractError("correlation undefined at zero variance");
    return sxy / std::sqrt(sxx * syy);
}

std::pair<double, double> aggregate_runs(const std::vector<double>& scores) {
    if (scores.empty()) throw ContractError("cannot aggregate zero runs");
    const double n = static_cast<double>(scores.size());
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    return {mean, std::sqrt(var / n)};
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "dataset,tau,variant,metric,mean,std,n_runs\n";
    for (const auto& c : cells) {
        os << c.dataset << ',' << c.tau << ',' << c.variant << ',' << c.metric << ','
           << c.mean << ',' << c.std << ',' << c.n_runs << '\n';
    }
    return os.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json root;
    for (const auto& c : cells) {
        root[c.dataset][std::to_string(c.tau)][c.variant][c.metric] = {
            {"mean", c.mean}, {"std", c.std}, {"n_runs", c.n_runs}};
    }
    return root.dump(2);
}

}  // namespace gatgan
