// Python bindings for the core operations: toy/CSV data ingestion, model
// construction and training, synthetic generation, checkpoints, and the two
// evaluation metrics. Arrays cross the boundary as contiguous float64
// copies; nothing here adds behavior beyond the C++ library.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gatgan/checkpoint.hpp"
#include "gatgan/config.hpp"
#include "gatgan/data.hpp"
#include "gatgan/errors.hpp"
#include "gatgan/metrics.hpp"
#include "gatgan/model.hpp"
#include "gatgan/training.hpp"

namespace py = pybind11;
using namespace gatgan;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const DoubleArray& arr) {
    Shape shape(static_cast<std::size_t>(arr.ndim()));
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
        shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arr.shape(i));
    }
    std::vector<double> values(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(values));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> arr(shape);
    std::copy(t.values().begin(), t.values().end(), arr.mutable_data());
    return arr;
}

// Wraps an in-memory [K,tau,F] batch as a dataset with unit-range
// normalization statistics, for the metric entry points.
WindowedDataset dataset_from_windows(Tensor windows) {
    if (windows.rank() != 3) {
        throw DimensionError("windows must be [count, window_length, features], got shape " +
                             shape_str(windows.shape()));
    }
    WindowedDataset ds;
    ds.tau = windows.shape()[1];
    ds.stride = ds.tau;
    const std::size_t f = windows.shape()[2];
    const std::size_t k = windows.shape()[0];
    ds.params = NormalizationParams{std::vector<double>(f, 0.0), std::vector<double>(f, 1.0),
                                    std::vector<bool>(f, false)};
    ds.start_indices.resize(k);
    for (std::size_t i = 0; i < k; ++i) ds.start_indices[i] = i * ds.tau;
    ds.windows = std::move(windows);
    return ds;
}

HeaderMode header_mode_from(const std::string& name) {
    if (name == "auto") return HeaderMode::automatic;
    if (name == "always") return HeaderMode::always;
    if (name == "never") return HeaderMode::never;
    throw ConfigError("header must be auto, always or never, got '" + name + "'");
}

ToyKind toy_kind_from(const std::string& name) {
    if (name == "coupled_sines") return ToyKind::coupled_sines;
    if (name == "ar_process") return ToyKind::ar_process;
    throw ConfigError("toy dataset kind must be coupled_sines or ar_process, got '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Graph-attention adversarial autoencoder for multivariate time series: "
        "data windowing, two-phase training, synthetic generation, and the "
        "embedding-distance / train-on-synthetic evaluation metrics.";
    m.attr("__version__") = "0.1.0";

    py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    // ---- configurations -------------------------------------------------

    py::class_<ModelConfig>(m, "ModelConfig",
                            "Architecture description: window length, feature count, latent "
                            "width, attention rounds, and the ablation switches.")
        .def(py::init<>())
        .def_readwrite("tau", &ModelConfig::tau)
        .def_readwrite("features", &ModelConfig::features)
        .def_readwrite("latent", &ModelConfig::latent)
        .def_readwrite("attention_pairs", &ModelConfig::attention_pairs)
        .def_readwrite("ffn_depth", &ModelConfig::ffn_depth)
        .def_readwrite("conv_width", &ModelConfig::conv_width)
        .def_readwrite("noise_std", &ModelConfig::noise_std)
        .def_readwrite("slope", &ModelConfig::slope)
        .def_readwrite("seed", &ModelConfig::seed)
        .def_readwrite("use_spatial", &ModelConfig::use_spatial)
        .def_readwrite("use_temporal", &ModelConfig::use_temporal)
        .def_readwrite("use_encoder_conv", &ModelConfig::use_encoder_conv)
        .def_readwrite("affine_decoder", &ModelConfig::affine_decoder)
        .def("validate", &ModelConfig::validate);

    py::class_<TrainingConfig>(m, "TrainingConfig",
                               "Two-phase training schedule: learning rates, adversarial "
                               "stabilizers, and the reconstruction weight.")
        .def(py::init<>())
        .def_readwrite("batch_size", &TrainingConfig::batch_size)
        .def_readwrite("epochs", &TrainingConfig::epochs)
        .def_readwrite("lr_encoder", &TrainingConfig::lr_encoder)
        .def_readwrite("lr_decoder", &TrainingConfig::lr_decoder)
        .def_readwrite("lr_discriminator", &TrainingConfig::lr_discriminator)
        .def_readwrite("beta1", &TrainingConfig::beta1)
        .def_readwrite("beta2", &TrainingConfig::beta2)
        .def_readwrite("adam_eps", &TrainingConfig::adam_eps)
        .def_readwrite("flip_prob", &TrainingConfig::flip_prob)
        .def_readwrite("noise_std", &TrainingConfig::noise_std)
        .def_readwrite("lambda_r", &TrainingConfig::lambda_r)
        .def_readwrite("seed", &TrainingConfig::seed)
        .def_readwrite("skip_reconstruction_phase", &TrainingConfig::skip_reconstruction_phase)
        .def("validate", &TrainingConfig::validate);

    py::class_<EmbedderConfig>(m, "EmbedderConfig",
                               "Fit schedule for the evaluation embedder (next-step regression "
                               "on real windows).")
        .def(py::init<>())
        .def_readwrite("d_model", &EmbedderConfig::d_model)
        .def_readwrite("heads", &EmbedderConfig::heads)
        .def_readwrite("blocks", &EmbedderConfig::blocks)
        .def_readwrite("epochs", &EmbedderConfig::epochs)
        .def_readwrite("batch_size", &EmbedderConfig::batch_size)
        .def_readwrite("lr", &EmbedderConfig::lr)
        .def_readwrite("val_frac", &EmbedderConfig::val_frac)
        .def_readwrite("seed", &EmbedderConfig::seed)
        .def("validate", &EmbedderConfig::validate);

    py::class_<ForecastConfig>(m, "ForecastConfig",
                               "Downstream forecaster schedule for the train-on-synthetic, "
                               "test-on-real score.")
        .def(py::init<>())
        .def_readwrite("hidden", &ForecastConfig::hidden)
        .def_readwrite("layers", &ForecastConfig::layers)
        .def_readwrite("horizon", &ForecastConfig::horizon)
        .def_readwrite("epochs", &ForecastConfig::epochs)
        .def_readwrite("batch_size", &ForecastConfig::batch_size)
        .def_readwrite("lr", &ForecastConfig::lr)
        .def_readwrite("seed", &ForecastConfig::seed)
        .def("validate", &ForecastConfig::validate);

    // ---- model ----------------------------------------------------------

    py::class_<GatGanModel>(m, "Model",
                            "Adversarial autoencoder with graph attention: encoder doubles as "
                            "the generator, a latent discriminator matches the posterior to a "
                            "standard normal prior, and generation decodes prior samples.")
        .def(py::init<ModelConfig>(), py::arg("config"))
        .def_property_readonly("config", [](GatGanModel& self) { return self.config(); })
        .def_readonly("epochs_trained", &GatGanModel::epochs_trained)
        .def("param_count", &GatGanModel::param_count)
        .def(
            "encode",
            [](GatGanModel& self, const DoubleArray& x, bool training) {
                return array_from_tensor(self.encode(tensor_from_array(x), training));
            },
            py::arg("x"), py::arg("training") = false,
            "Series [K,tau,F] to latent codes [K,tau,latent].")
        .def(
            "decode",
            [](GatGanModel& self, const DoubleArray& z, bool training) {
                return array_from_tensor(self.decode(tensor_from_array(z), training));
            },
            py::arg("z"), py::arg("training") = false,
            "Latent codes [K,tau,latent] back to unit-range series [K,tau,F].")
        .def(
            "discriminate",
            [](GatGanModel& self, const DoubleArray& z, bool training) {
                return array_from_tensor(self.discriminate(tensor_from_array(z), training));
            },
            py::arg("z"), py::arg("training") = false,
            "Per-sequence probability that a latent batch came from the prior.")
        .def(
            "generate",
            [](GatGanModel& self, std::size_t count, std::uint64_t seed) {
                Rng rng(seed);
                return array_from_tensor(self.generate(count, rng));
            },
            py::arg("count"), py::arg("seed") = 1,
            "Decode `count` prior samples into synthetic unit-range windows.")
        .def(
            "regenerate",
            [](GatGanModel& self, const DoubleArray& x, std::uint64_t seed) {
                Rng rng(seed);
                return array_from_tensor(self.regenerate(tensor_from_array(x), rng));
            },
            py::arg("x"), py::arg("seed") = 1,
            "Perturb real windows, encode, and decode them.");

    m.def(
        "train",
        [](GatGanModel& model, const DoubleArray& windows, const TrainingConfig& cfg) {
            Tensor data = tensor_from_array(windows);
            std::vector<LossRecord> records;
            {
                py::gil_scoped_release release;
                records = train_loop(model, data, cfg);
            }
            py::list out;
            for (const LossRecord& r : records) {
                py::dict d;
                d["epoch"] = r.epoch;
                d["recon"] = r.recon;
                d["gen"] = r.gen;
                d["disc"] = r.disc;
                d["disc_accuracy"] = r.disc_accuracy;
                d["seconds"] = r.seconds;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("model"), py::arg("windows"), py::arg("config") = TrainingConfig{},
        "Run the two-phase loop on unit-range windows [K,tau,F]; returns one "
        "loss record per epoch.");

    m.def(
        "apply_variant",
        [](const std::string& name, ModelConfig& model, TrainingConfig& training) {
            apply_variant(name, model, training);
        },
        py::arg("name"), py::arg("model_config"), py::arg("training_config"),
        "Fold an ablation variant name into the two configurations in place.");
    m.attr("VARIANTS") = kVariants;

    // ---- embedder and metrics --------------------------------------------

    py::class_<TransformerEmbedder>(m, "Embedder",
                                    "Transformer encoder that maps [K,T,F] windows to fixed "
                                    "vectors for the distribution-distance metric.")
        .def(py::init([](std::size_t features, std::size_t d_model, std::size_t heads,
                         std::size_t blocks, std::uint64_t seed) {
                 Rng rng(seed);
                 return TransformerEmbedder(features, d_model, heads, blocks, rng);
             }),
             py::arg("features"), py::arg("d_model") = 16, py::arg("heads") = 2,
             py::arg("blocks") = 1, py::arg("seed") = 7)
        .def_property_readonly("d_model", &TransformerEmbedder::d_model)
        .def(
            "embed",
            [](const TransformerEmbedder& self, const DoubleArray& x) {
                return array_from_tensor(self.embed(tensor_from_array(x)));
            },
            py::arg("x"), "Windows [K,T,F] to embeddings [K,d_model].");

    m.def(
        "train_embedder",
        [](const DoubleArray& windows, const EmbedderConfig& cfg) {
            WindowedDataset ds = dataset_from_windows(tensor_from_array(windows));
            EmbedderTrainResult r = [&] {
                py::gil_scoped_release release;
                return train_embedder(ds, cfg);
            }();
            return py::make_tuple(std::move(r.embedder), r.train_mse, r.val_mse);
        },
        py::arg("windows"), py::arg("config") = EmbedderConfig{},
        "Fit the embedder as a next-step regressor on real windows; returns "
        "(embedder, train_mse_per_epoch, val_mse_per_epoch).");

    m.def(
        "ftd_score",
        [](const DoubleArray& real, const DoubleArray& synthetic, TransformerEmbedder& embedder) {
            Tensor r = tensor_from_array(real);
            Tensor s = tensor_from_array(synthetic);
            py::gil_scoped_release release;
            return ftd_score(r, s, embedder);
        },
        py::arg("real"), py::arg("synthetic"), py::arg("embedder"),
        "Distance between Gaussian fits of embedded real and synthetic "
        "windows; lower is better.");

    m.def(
        "frechet_distance",
        [](const DoubleArray& a, const DoubleArray& b) {
            GaussianMoments ma = fit_moments(tensor_from_array(a));
            GaussianMoments mb = fit_moments(tensor_from_array(b));
            return frechet_distance(ma, mb);
        },
        py::arg("a"), py::arg("b"),
        "Squared 2-Wasserstein distance between Gaussians fitted to two "
        "[K,d] point clouds.");

    m.def(
        "predictive_score",
        [](const DoubleArray& real_test, const DoubleArray& synthetic_train, std::size_t horizon,
           const ForecastConfig& cfg) {
            WindowedDataset real = dataset_from_windows(tensor_from_array(real_test));
            WindowedDataset synth = dataset_from_windows(tensor_from_array(synthetic_train));
            py::gil_scoped_release release;
            return predictive_score(real, synth, horizon, cfg);
        },
        py::arg("real_test"), py::arg("synthetic_train"), py::arg("horizon") = 8,
        py::arg("config") = ForecastConfig{},
        "Train a forecaster on synthetic windows, score mean absolute error "
        "on the last `horizon` steps of real windows.");

    m.def("pearson_corr", &pearson_corr, py::arg("xs"), py::arg("ys"),
          "Sample Pearson correlation of two equal-length sequences.");

    // ---- data -----------------------------------------------------------

    m.def(
        "toy_dataset",
        [](const std::string& kind, std::size_t windows, std::size_t tau, std::size_t features,
           double noise, std::uint64_t seed) {
            return array_from_tensor(
                toy_generator(toy_kind_from(kind), windows, tau, features, noise, seed).windows);
        },
        py::arg("kind") = "coupled_sines", py::arg("windows") = 128, py::arg("tau") = 64,
        py::arg("features") = 5, py::arg("noise") = 0.02, py::arg("seed") = 1,
        "Deterministic synthetic benchmark windows in [0,1], shape "
        "[windows, tau, features].");

    m.def(
        "load_windows",
        [](const std::string& path, std::size_t tau, std::size_t stride,
           const std::string& header) {
            RawSeries raw = load_csv(path, header_mode_from(header));
            auto [normalized, params] = minmax_normalize(raw);
            WindowedDataset ds = window(normalized, tau, stride == 0 ? tau : stride, params);
            py::dict meta;
            meta["feature_names"] = raw.feature_names;
            meta["min"] = params.min;
            meta["max"] = params.max;
            meta["dropped_rows"] = raw.dropped_rows;
            return py::make_tuple(array_from_tensor(ds.windows), meta);
        },
        py::arg("path"), py::arg("tau") = 64, py::arg("stride") = 0, py::arg("header") = "auto",
        "Load a CSV series, min-max normalize per feature, and slide a "
        "window of length tau (stride 0 means non-overlapping). Returns "
        "(windows, metadata).");

    // ---- checkpoints ------------------------------------------------------

    m.def(
        "save_model",
        [](GatGanModel& model, const std::string& path, int spectral_refine_iters) {
            model.refine_spectral_estimates(spectral_refine_iters);
            save_checkpoint(snapshot_model(model), path);
        },
        py::arg("model"), py::arg("path"), py::arg("spectral_refine_iters") = 30,
        "Snapshot every parameter and buffer to a canonical checkpoint file.");

    m.def(
        "load_model",
        [](const std::string& path) { return restore_model(load_checkpoint(path)); },
        py::arg("path"), "Rebuild a model from a checkpoint file.");

    m.def(
        "save_embedder",
        [](TransformerEmbedder& embedder, const EmbedderConfig& cfg, const std::string& path) {
            const std::size_t features = embedder.input_proj.in_dim();
            save_checkpoint(snapshot_embedder(embedder, cfg, features), path);
        },
        py::arg("embedder"), py::arg("config"), py::arg("path"),
        "Snapshot a fitted embedder to a canonical checkpoint file.");

    m.def(
        "load_embedder",
        [](const std::string& path) { return restore_embedder(load_checkpoint(path)); },
        py::arg("path"), "Rebuild an embedder from a checkpoint file.");
}
