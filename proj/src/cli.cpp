#include "gatgan/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gatgan/checkpoint.hpp"
#include "gatgan/config.hpp"
#include "gatgan/data.hpp"
#include "gatgan/errors.hpp"
#include "gatgan/metrics.hpp"
#include "gatgan/model.hpp"
#include "gatgan/training.hpp"

#include "json.hpp"

namespace gatgan::cli {

namespace fs = std::filesystem;

namespace {

// Maps the library's exception taxonomy onto the exit-code contract.
template <typename Fn>
int guarded(Fn&& fn, std::ostream& err) {
    try {
        return fn();
    } catch (const TrainingDiverged& e) {
        err << "error: " << e.what();
        if (!e.last_checkpoint().empty()) {
            err << " (last checkpoint: " << e.last_checkpoint() << ")";
        }
        err << "\n";
        return kDiverged;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << "\n";
        return kUnexpected;
    }
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig rc = args.config_path.empty() ? RunConfig{}
                                            : RunConfig::from_file(args.config_path);
    for (const auto& o : args.overrides) rc.apply_override(o);
    return rc;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw ConfigError("short write to '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::vector<std::string> default_names(std::size_t f) {
    std::vector<std::string> names(f);
    for (std::size_t i = 0; i < f; ++i) names[i] = "f" + std::to_string(i);
    return names;
}

struct LoadedData {
    WindowedDataset dataset;
    std::vector<std::string> feature_names;
};

// Resolves the data key: "toy:<kind>" synthesizes a benchmark series,
// anything else loads a CSV, normalizes per feature and windows it.
LoadedData load_windows(const RunConfig& rc) {
    if (rc.data.rfind("toy:", 0) == 0) {
        const std::string kind = rc.data.substr(4);
        ToyKind tk;
        if (kind == "coupled_sines") {
            tk = ToyKind::coupled_sines;
        } else if (kind == "ar_process") {
            tk = ToyKind::ar_process;
        } else {
            throw ConfigError("unknown toy dataset '" + kind +
                              "'; valid: coupled_sines, ar_process");
        }
        LoadedData out{toy_generator(tk, rc.toy_windows, rc.tau, rc.toy_features, rc.toy_noise,
                                     rc.seed),
                       default_names(rc.toy_features)};
        return out;
    }
    const RawSeries raw = load_csv(rc.data, rc.header_mode());
    auto [normalized, params] = minmax_normalize(raw);
    const std::size_t stride = rc.stride == 0 ? rc.tau : rc.stride;
    LoadedData out{window(normalized, rc.tau, stride, params), raw.feature_names};
    return out;
}

Tensor gather_windows(const Tensor& windows, const std::vector<std::size_t>& indices) {
    const auto& s = windows.shape();
    const std::size_t per = s[1] * s[2];
    std::vector<double> v(indices.size() * per);
    auto src = windows.values();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * per),
                  src.begin() + static_cast<std::ptrdiff_t>((indices[i] + 1) * per),
                  v.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return Tensor({indices.size(), s[1], s[2]}, std::move(v));
}

// Reads a CSV of stacked fixed-length sequences (K*tau rows) and applies
// the supplied per-feature statistics.
WindowedDataset stacked_windows(const std::string& path, std::size_t tau, HeaderMode header,
                                const NormalizationParams& params) {
    const RawSeries raw = load_csv(path, header);
    if (raw.features != params.features()) {
        throw ConfigError("'" + path + "' has " + std::to_string(raw.features) +
                          " features, expected " + std::to_string(params.features()));
    }
    if (tau == 0 || raw.steps % tau != 0) {
        throw ConfigError("'" + path + "' has " + std::to_string(raw.steps) +
                          " rows, not a multiple of tau=" + std::to_string(tau));
    }
    const RawSeries normalized = normalize_with(raw, params);
    return window(normalized, tau, tau, params);
}

std::string dataset_label(const std::string& path) {
    return fs::path(path).stem().string();
}

std::string embedder_log_csv(const EmbedderTrainResult& res) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,train_mse,val_mse\n";
    for (std::size_t i = 0; i < res.train_mse.size(); ++i) {
        os << (i + 1) << "," << res.train_mse[i] << "," << res.val_mse[i] << "\n";
    }
    return os.str();
}

// Shared-index subsample so that identical inputs produce identical
// subsets (real vs itself must score zero on every run).
std::vector<std::size_t> run_subsample(std::size_t k_common, std::uint64_t seed) {
    std::vector<std::size_t> indices(k_common);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(indices);
    const std::size_t m = std::max<std::size_t>(2, (k_common * 4) / 5);
    indices.resize(std::min(m, k_common));
    std::sort(indices.begin(), indices.end());
    return indices;
}

std::vector<double> ftd_runs(const WindowedDataset& real, const WindowedDataset& synthetic,
                             TransformerEmbedder& embedder, std::size_t runs,
                             std::uint64_t seed) {
    const std::size_t k_common = std::min(real.count(), synthetic.count());
    if (k_common < 2) {
        throw ConfigError("need at least 2 sequences per side for the distance metric");
    }
    std::vector<double> scores;
    scores.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto idx = run_subsample(k_common, seed + i);
        const Tensor a = gather_windows(real.windows, idx);
        const Tensor b = gather_windows(synthetic.windows, idx);
        scores.push_back(ftd_score(a, b, embedder));
    }
    return scores;
}

std::vector<double> predictive_runs(const WindowedDataset& real,
                                    const WindowedDataset& synthetic, const RunConfig& rc) {
    std::vector<double> scores;
    scores.reserve(rc.runs);
    for (std::size_t i = 0; i < rc.runs; ++i) {
        ForecastConfig fc = rc.forecast_config();
        fc.seed = rc.seed + i;
        scores.push_back(predictive_score(real, synthetic, rc.horizon, fc));
    }
    return scores;
}

TransformerEmbedder load_embedder_for(const std::string& path, std::size_t features) {
    EmbedderConfig cfg;
    std::size_t ck_features = 0;
    TransformerEmbedder embedder = restore_embedder(load_checkpoint(path), cfg, ck_features);
    if (ck_features != features) {
        throw ConfigError("embedder checkpoint was trained on " + std::to_string(ck_features) +
                          " features, data has " + std::to_string(features));
    }
    return embedder;
}

// Writes best/last snapshots with freshly certified spectral estimates.
CheckpointFn snapshot_writer(const std::string& out_dir) {
    return [out_dir](GatGanModel& m, std::size_t, bool is_best) {
        m.refine_spectral_estimates(30);
        const Checkpoint ck = snapshot_model(m);
        const std::string last = out_dir + "/last.ckpt";
        save_checkpoint(ck, last);
        if (is_best) save_checkpoint(ck, out_dir + "/best.ckpt");
        return last;
    };
}

}  // namespace

int cmd_train(const CommonArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(
        [&]() {
            RunConfig rc = resolve_config(args);
            rc.require_resolved(true, true);
            const LoadedData loaded = load_windows(rc);
            const Tensor& windows = loaded.dataset.windows;
            if (loaded.dataset.count() == 0) {
                throw ConfigError("dataset '" + rc.data + "' yields no windows of length " +
                                  std::to_string(rc.tau));
            }

            fs::create_directories(rc.out);
            write_file(rc.out + "/config.resolved.txt", rc.to_text());
            write_file(rc.out + "/normalization.json",
                       params_to_json(loaded.dataset.params, loaded.feature_names));

            const std::size_t features = windows.shape()[2];
            GatGanModel model(rc.model_config(features));
            const auto records =
                train_loop(model, windows, rc.training_config(), snapshot_writer(rc.out));
            write_file(rc.out + "/loss_log.csv", loss_log_csv(records));

            model.refine_spectral_estimates(30);
            const Checkpoint final_ck = snapshot_model(model);
            save_checkpoint(final_ck, rc.out + "/last.ckpt");

            out << "trained variant '" << rc.variant << "' for " << records.size()
                << " epochs on " << loaded.dataset.count() << " windows\n";
            if (!records.empty()) {
                out << "final losses: recon " << records.back().recon << ", gen "
                    << records.back().gen << ", disc " << records.back().disc << "\n";
            }
            out << "checkpoint " << rc.out << "/last.ckpt digest "
                << checkpoint_payload_digest(final_ck) << "\n";
            return kOk;
        },
        err);
}

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(
        [&]() {
            if (args.checkpoint.empty()) throw ConfigError("no checkpoint given");
            if (args.out_csv.empty()) throw ConfigError("no output path given");
            if (args.count == 0) throw ConfigError("count must be at least 1");
            if (args.mode != "prior" && args.mode != "reconstruct") {
                throw ConfigError("mode must be prior or reconstruct, got '" + args.mode + "'");
            }

            const Checkpoint ck = load_checkpoint(args.checkpoint);
            GatGanModel model = restore_model(ck);
            const std::size_t features = model.config().features;
            const std::size_t tau = model.config().tau;

            // Training writes the normalization sidecar next to its
            // checkpoints; when present, output is mapped back to data units.
            const fs::path sidecar = fs::path(args.checkpoint).parent_path() /
                                     "normalization.json";
            bool have_params = fs::exists(sidecar);
            NormalizationParams params;
            std::vector<std::string> names = default_names(features);
            if (have_params) {
                const std::string text = read_file(sidecar.string());
                params = params_from_json(text);
                if (params.features() != features) {
                    throw ConfigError("normalization sidecar has " +
                                      std::to_string(params.features()) +
                                      " features, checkpoint has " + std::to_string(features));
                }
                const auto j = nlohmann::json::parse(text);
                if (j.contains("feature_names")) {
                    names = j.at("feature_names").get<std::vector<std::string>>();
                }
            }

            Rng rng(args.seed);
            Tensor windows;
            if (args.mode == "prior") {
                windows = model.generate(args.count, rng);
            } else {
                if (args.data.empty()) {
                    throw ConfigError("reconstruct mode needs --data with source sequences");
                }
                HeaderMode hm = HeaderMode::automatic;
                if (args.header == "always") hm = HeaderMode::always;
                if (args.header == "never") hm = HeaderMode::never;
                WindowedDataset source;
                if (have_params) {
                    source = stacked_windows(args.data, tau, hm, params);
                } else {
                    const RawSeries raw = load_csv(args.data, hm);
                    auto [normalized, p] = minmax_normalize(raw);
                    source = window(normalized, tau, tau, p);
                }
                if (source.count() < args.count) {
                    throw ConfigError("source has " + std::to_string(source.count()) +
                                      " windows, need " + std::to_string(args.count));
                }
                const Tensor x = slice_axis(source.windows, 0, 0, args.count);
                windows = model.regenerate(x, rng);
            }

            if (have_params) windows = denormalize(windows, params);
            write_file(args.out_csv, to_csv(windows, names));

            nlohmann::json manifest;
            manifest["checkpoint"] = args.checkpoint;
            manifest["checkpoint_digest"] = checkpoint_payload_digest(ck);
            manifest["count"] = args.count;
            manifest["denormalized"] = have_params;
            manifest["features"] = features;
            manifest["mode"] = args.mode;
            manifest["seed"] = args.seed;
            manifest["tau"] = tau;
            write_file(args.out_csv + ".manifest.json", manifest.dump(2) + "\n");

            out << "wrote " << args.count << " sequences of length " << tau << " to "
                << args.out_csv << "\n";
            return kOk;
        },
        err);
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(
        [&]() {
            if (args.metric != "ftd" && args.metric != "predictive" && args.metric != "both") {
                throw ConfigError("metric must be ftd, predictive or both, got '" +
                                  args.metric + "'");
            }
            if (args.real_csv.empty()) throw ConfigError("no real dataset given");
            if (args.synthetic_csv.empty()) throw ConfigError("no synthetic dataset given");
            RunConfig rc = resolve_config(args.common);
            if (rc.runs == 0) throw ConfigError("runs must be at least 1");

            // Both files hold stacked length-tau sequences in data units;
            // the real data's statistics normalize both sides.
            const RawSeries real_raw = load_csv(args.real_csv, rc.header_mode());
            if (rc.tau == 0 || real_raw.steps % rc.tau != 0) {
                throw ConfigError("'" + args.real_csv + "' has " +
                                  std::to_string(real_raw.steps) +
                                  " rows, not a multiple of tau=" + std::to_string(rc.tau));
            }
            auto [real_norm, params] = minmax_normalize(real_raw);
            const WindowedDataset real = window(real_norm, rc.tau, rc.tau, params);
            const WindowedDataset synthetic =
                stacked_windows(args.synthetic_csv, rc.tau, rc.header_mode(), params);

            EvalReport report;
            const std::string label = dataset_label(args.real_csv);
            if (args.metric == "ftd" || args.metric == "both") {
                if (args.embedder_checkpoint.empty()) {
                    throw ConfigError("ftd needs --embedder with a trained embedder checkpoint");
                }
                TransformerEmbedder embedder =
                    load_embedder_for(args.embedder_checkpoint, real_raw.features);
                const auto scores = ftd_runs(real, synthetic, embedder, rc.runs, rc.seed);
                const auto [mean, std] = aggregate_runs(scores);
                report.cells.push_back({label, rc.tau, rc.variant, "ftd", mean, std, rc.runs});
            }
            if (args.metric == "predictive" || args.metric == "both") {
                const auto scores = predictive_runs(real, synthetic, rc);
                const auto [mean, std] = aggregate_runs(scores);
                report.cells.push_back(
                    {label, rc.tau, rc.variant, "predictive_mae", mean, std, rc.runs});
            }

            out << report.to_csv();
            if (!args.out_prefix.empty()) {
                const fs::path parent = fs::path(args.out_prefix).parent_path();
                if (!parent.empty()) fs::create_directories(parent);
                write_file(args.out_prefix + ".csv", report.to_csv());
                write_file(args.out_prefix + ".json", report.to_json() + "\n");
            }
            return kOk;
        },
        err);
}

int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(
        [&]() {
            RunConfig rc = resolve_config(args.common);
            rc.require_resolved(true, true);
            if (rc.runs == 0) throw ConfigError("runs must be at least 1");
            std::vector<std::string> variants =
                args.variants.empty() ? kVariants : args.variants;
            for (const auto& v : variants) {
                ModelConfig m;
                TrainingConfig t;
                apply_variant(v, m, t);  // unknown names abort before any training
            }

            const LoadedData loaded = load_windows(rc);
            const WindowedDataset& real = loaded.dataset;
            if (real.count() < 2) {
                throw ConfigError("ablation needs at least 2 windows, got " +
                                  std::to_string(real.count()));
            }
            const std::size_t features = real.windows.shape()[2];
            fs::create_directories(rc.out);
            write_file(rc.out + "/config.resolved.txt", rc.to_text());

            // One embedder per window length, shared by every variant so
            // the distance column is comparable across rows.
            out << "training shared embedder on " << real.count() << " windows\n";
            EmbedderTrainResult embedder = train_embedder(real, rc.embedder_config());

            EvalReport report;
            std::vector<double> ftd_means, mae_means;
            for (const auto& variant : variants) {
                RunConfig rv = rc;
                rv.variant = variant;
                const std::string vdir = rc.out + "/" + variant;
                fs::create_directories(vdir);

                std::vector<double> ftds, maes;
                for (std::size_t r = 0; r < rc.runs; ++r) {
                    ModelConfig mc = rv.model_config(features);
                    mc.seed = rc.seed + r;
                    TrainingConfig tc = rv.training_config();
                    tc.seed = rc.seed + r;
                    GatGanModel model(mc);
                    const auto records = train_loop(model, real.windows, tc, nullptr);
                    if (r == 0) {
                        model.refine_spectral_estimates(30);
                        save_checkpoint(snapshot_model(model), vdir + "/last.ckpt");
                        write_file(vdir + "/loss_log.csv", loss_log_csv(records));
                    }

                    Rng rng(rc.seed + r);
                    const Tensor synthetic = model.generate(real.count(), rng);
                    ftds.push_back(ftd_score(real.windows, synthetic, embedder.embedder));
                    WindowedDataset synds;
                    synds.windows = synthetic;
                    synds.tau = rc.tau;
                    synds.stride = rc.tau;
                    synds.params = real.params;
                    synds.split_tag = "synthetic";
                    ForecastConfig fc = rv.forecast_config();
                    fc.seed = rc.seed + r;
                    maes.push_back(predictive_score(real, synds, rc.horizon, fc));
                }

                const std::string label =
                    rc.data.rfind("toy:", 0) == 0 ? rc.data.substr(4) : dataset_label(rc.data);
                const auto [fm, fstd] = aggregate_runs(ftds);
                report.cells.push_back({label, rc.tau, variant, "ftd", fm, fstd, rc.runs});
                const auto [mm, mstd] = aggregate_runs(maes);
                report.cells.push_back(
                    {label, rc.tau, variant, "predictive_mae", mm, mstd, rc.runs});
                ftd_means.push_back(fm);
                mae_means.push_back(mm);
                out << "variant " << variant << ": ftd " << fm << " +- " << fstd
                    << ", predictive_mae " << mm << " +- " << mstd << "\n";
            }

            out << report.to_csv();
            write_file(rc.out + "/ablation_report.csv", report.to_csv());
            std::string corr_note;
            nlohmann::json extra = nlohmann::json::parse(report.to_json());
            if (variants.size() >= 2) {
                try {
                    const double r = pearson_corr(ftd_means, mae_means);
                    extra["ftd_vs_predictive_pearson_r"] = r;
                    out << "pearson_r(ftd, predictive_mae) = " << r << "\n";
                } catch (const ContractError& e) {
                    corr_note = e.what();
                    out << "pearson_r unavailable: " << corr_note << "\n";
                }
            }
            write_file(rc.out + "/ablation_report.json", extra.dump(2) + "\n");
            return kOk;
        },
        err);
}

int cmd_train_embedder(const CommonArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(
        [&]() {
            RunConfig rc = resolve_config(args);
            rc.require_resolved(true, true);
            const LoadedData loaded = load_windows(rc);
            if (loaded.dataset.count() < 2) {
                throw ConfigError("embedder training needs at least 2 windows, got " +
                                  std::to_string(loaded.dataset.count()));
            }
            fs::create_directories(rc.out);
            write_file(rc.out + "/config.resolved.txt", rc.to_text());

            EmbedderConfig ec = rc.embedder_config();
            EmbedderTrainResult res = train_embedder(loaded.dataset, ec);
            const std::size_t features = loaded.dataset.windows.shape()[2];
            const Checkpoint ck = snapshot_embedder(res.embedder, ec, features);
            save_checkpoint(ck, rc.out + "/embedder.ckpt");
            write_file(rc.out + "/embedder_log.csv", embedder_log_csv(res));

            out << "trained embedder for " << res.val_mse.size() << " epochs\n";
            if (!res.val_mse.empty()) {
                out << "validation mse: first " << res.val_mse.front() << ", final "
                    << res.val_mse.back() << "\n";
            }
            out << "checkpoint " << rc.out << "/embedder.ckpt digest "
                << checkpoint_payload_digest(ck) << "\n";
            return kOk;
        },
        err);
}

}  // namespace gatgan::cli
