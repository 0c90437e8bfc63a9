#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gatgan/cli.hpp"

namespace {

// Shared flags map onto config keys so that file values, named flags and
// --set overrides all flow through one resolution path (later wins).
struct CommonFlags {
    std::string config_path;
    std::string data, out, variant;
    std::string seed, tau, runs, epochs;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file (key = value lines)");
        cmd->add_option("--data", data, "dataset: CSV path or toy:coupled_sines / toy:ar_process");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--tau", tau, "window length");
        cmd->add_option("--runs", runs, "number of repeated runs for mean/std reporting");
        cmd->add_option("--variant", variant, "model variant (full, no_decoder, ...)");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--set", sets, "extra key=value override, repeatable")
            ->take_all();
    }

    gatgan::cli::CommonArgs resolve() const {
        gatgan::cli::CommonArgs args;
        args.config_path = config_path;
        if (!data.empty()) args.overrides.push_back("data=" + data);
        if (!out.empty()) args.overrides.push_back("out=" + out);
        if (!seed.empty()) args.overrides.push_back("seed=" + seed);
        if (!tau.empty()) args.overrides.push_back("tau=" + tau);
        if (!runs.empty()) args.overrides.push_back("runs=" + runs);
        if (!variant.empty()) args.overrides.push_back("variant=" + variant);
        if (!epochs.empty()) args.overrides.push_back("epochs=" + epochs);
        for (const auto& s : sets) args.overrides.push_back(s);
        return args;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph-attention adversarial generator for multivariate time series"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train the generator on a dataset");
    CommonFlags train_flags;
    train_flags.attach(train);

    // generate
    auto* generate = app.add_subcommand("generate", "sample synthetic sequences from a checkpoint");
    gatgan::cli::GenerateArgs gen_args;
    generate->add_option("--ckpt", gen_args.checkpoint, "model checkpoint")->required();
    generate->add_option("--out", gen_args.out_csv, "output CSV path")->required();
    generate->add_option("--count", gen_args.count, "number of sequences");
    generate->add_option("--seed", gen_args.seed, "sampling seed");
    generate->add_option("--mode", gen_args.mode, "prior (sample latents) or reconstruct (re-encode --data)");
    generate->add_option("--data", gen_args.data, "source CSV for reconstruct mode");
    generate->add_option("--header", gen_args.header, "source CSV header handling: auto|always|never");

    // eval
    auto* eval = app.add_subcommand("eval", "score synthetic data against real data");
    gatgan::cli::EvalArgs eval_args;
    CommonFlags eval_flags;
    eval->add_option("metric", eval_args.metric, "ftd, predictive or both")->required();
    eval->add_option("--data", eval_args.real_csv, "real dataset CSV (stacked tau-length sequences)");
    eval->add_option("--synthetic", eval_args.synthetic_csv, "synthetic dataset CSV");
    eval->add_option("--embedder", eval_args.embedder_checkpoint, "embedder checkpoint (ftd/both)");
    eval->add_option("--out", eval_args.out_prefix, "report path prefix (.csv/.json)");
    eval->add_option("--config", eval_flags.config_path, "run configuration file");
    eval->add_option("--seed", eval_flags.seed, "base seed; run i uses seed+i");
    eval->add_option("--tau", eval_flags.tau, "sequence length in both CSVs");
    eval->add_option("--runs", eval_flags.runs, "repeated scoring runs");
    eval->add_option("--variant", eval_flags.variant, "variant label for the report");
    eval->add_option("--set", eval_flags.sets, "extra key=value override, repeatable")->take_all();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train and score every model variant");
    gatgan::cli::AblateArgs ablate_args;
    CommonFlags ablate_flags;
    ablate_flags.attach(ablate);
    ablate->add_option("--only", ablate_args.variants, "subset of variants, repeatable")
        ->take_all();

    // train-embedder
    auto* temb = app.add_subcommand("train-embedder", "fit the evaluation embedder on real data");
    CommonFlags temb_flags;
    temb_flags.attach(temb);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gatgan::cli::kUsage;
    }

    if (train->parsed()) {
        return gatgan::cli::cmd_train(train_flags.resolve(), std::cout, std::cerr);
    }
    if (generate->parsed()) {
        return gatgan::cli::cmd_generate(gen_args, std::cout, std::cerr);
    }
    if (eval->parsed()) {
        eval_args.common = eval_flags.resolve();
        return gatgan::cli::cmd_eval(eval_args, std::cout, std::cerr);
    }
    if (ablate->parsed()) {
        ablate_args.common = ablate_flags.resolve();
        return gatgan::cli::cmd_ablate(ablate_args, std::cout, std::cerr);
    }
    if (temb->parsed()) {
        return gatgan::cli::cmd_train_embedder(temb_flags.resolve(), std::cout, std::cerr);
    }
    return gatgan::cli::kUsage;
}
