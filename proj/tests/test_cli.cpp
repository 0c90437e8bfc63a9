#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gatgan/checkpoint.hpp"
#include "gatgan/cli.hpp"
#include "gatgan/config.hpp"
#include "gatgan/data.hpp"
#include "gatgan/errors.hpp"

using namespace gatgan;
using namespace gatgan::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;

    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("gg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += (c == '\n');
    return n;
}

// Tiny-budget overrides shared by the training-based cases.
std::vector<std::string> tiny_train_overrides(const std::string& out_dir) {
    return {
        "data=toy:coupled_sines", "out=" + out_dir, "tau=8",   "toy_windows=8",
        "toy_features=3",         "latent=4",       "attention_pairs=1",
        "ffn_depth=1",            "epochs=2",       "batch_size=4",
        "seed=11",
    };
}

// Stacked windows in data units, for eval/reconstruct inputs.
std::string toy_csv(const TempDir& dir, const std::string& name, std::uint64_t seed,
                    std::size_t k = 8, std::size_t tau = 8, std::size_t f = 3) {
    const WindowedDataset ds = toy_generator(ToyKind::coupled_sines, k, tau, f, 0.02, seed);
    const Tensor denms = denormalize(ds.windows, ds.params);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < f; ++i) names.push_back("f" + std::to_string(i));
    const std::string path = dir.file(name);
    spit(path, to_csv(denms, names));
    return path;
}

int train_embedder_at(const TempDir& dir, const std::string& data, const std::string& out_dir) {
    CommonArgs args;
    args.overrides = {"data=" + data,  "out=" + out_dir, "tau=8",          "toy_windows=8",
                      "toy_features=3", "embed_dim=8",    "embed_heads=2",  "embed_blocks=1",
                      "embed_epochs=2", "embed_batch=4",  "seed=3"};
    std::ostringstream out, err;
    return cmd_train_embedder(args, out, err);
}

}  // namespace

TEST_CASE("train writes checkpoints, logs and a resolved config") {
    TempDir dir;
    CommonArgs args;
    args.overrides = tiny_train_overrides(dir.file("run"));
    std::ostringstream out, err;
    const int code = cmd_train(args, out, err);
    INFO(err.str());
    REQUIRE(code == kOk);

    CHECK(fs::exists(dir.file("run/config.resolved.txt")));
    CHECK(fs::exists(dir.file("run/normalization.json")));
    CHECK(fs::exists(dir.file("run/loss_log.csv")));
    CHECK(fs::exists(dir.file("run/last.ckpt")));
    CHECK(fs::exists(dir.file("run/best.ckpt")));

    const std::string log = slurp(dir.file("run/loss_log.csv"));
    CHECK(line_count(log) == 3);  // header + 2 epochs
    CHECK(log.rfind("epoch,recon,gen,disc,disc_accuracy,seconds\n", 0) == 0);

    const Checkpoint ck = load_checkpoint(dir.file("run/last.ckpt"));
    CHECK(ck.kind == "gatgan");
    CHECK(ck.epochs_trained == 2);

    // The resolved snapshot parses back and reproduces itself.
    const std::string snapshot = slurp(dir.file("run/config.resolved.txt"));
    CHECK(RunConfig::from_text(snapshot, "snapshot").to_text() == snapshot);
}

TEST_CASE("zero-epoch training still writes a valid initial checkpoint") {
    TempDir dir;
    CommonArgs args;
    args.overrides = tiny_train_overrides(dir.file("run"));
    args.overrides.push_back("epochs=0");
    std::ostringstream out, err;
    REQUIRE(cmd_train(args, out, err) == kOk);

    const std::string log = slurp(dir.file("run/loss_log.csv"));
    CHECK(line_count(log) == 1);  // header only
    const Checkpoint ck = load_checkpoint(dir.file("run/last.ckpt"));
    CHECK(ck.epochs_trained == 0);
    CHECK_FALSE(ck.arrays.empty());
}

TEST_CASE("training is deterministic in config and seed") {
    TempDir dir;
    for (const char* run : {"a", "b"}) {
        CommonArgs args;
        args.overrides = tiny_train_overrides(dir.file(run));
        std::ostringstream out, err;
        REQUIRE(cmd_train(args, out, err) == kOk);
    }
    CHECK(slurp(dir.file("a/last.ckpt")) == slurp(dir.file("b/last.ckpt")));
    CHECK(slurp(dir.file("a/best.ckpt")) == slurp(dir.file("b/best.ckpt")));
    CHECK(slurp(dir.file("a/normalization.json")) == slurp(dir.file("b/normalization.json")));
}

TEST_CASE("unresolved and invalid configurations exit with code 2") {
    std::ostringstream out, err;
    CommonArgs args;  // no data, no out
    CHECK(cmd_train(args, out, err) == kUsage);
    CHECK(err.str().find("'data'") != std::string::npos);

    TempDir dir;
    CommonArgs bad;
    bad.overrides = {"data=toy:coupled_sines", "out=" + dir.file("x"), "epochs=nope"};
    std::ostringstream out2, err2;
    CHECK(cmd_train(bad, out2, err2) == kUsage);
    CHECK(err2.str().find("epochs") != std::string::npos);

    CommonArgs missing;
    missing.overrides = {"data=" + dir.file("absent.csv"), "out=" + dir.file("y")};
    std::ostringstream out3, err3;
    CHECK(cmd_train(missing, out3, err3) == kUsage);

    CommonArgs toy;
    toy.overrides = {"data=toy:unknown_kind", "out=" + dir.file("z")};
    std::ostringstream out4, err4;
    CHECK(cmd_train(toy, out4, err4) == kUsage);
    CHECK(err4.str().find("coupled_sines") != std::string::npos);
}

TEST_CASE("an overflowing objective aborts with the divergence exit code") {
    TempDir dir;
    CommonArgs args;
    args.overrides = tiny_train_overrides(dir.file("run"));
    args.overrides.push_back("lambda_r=1e308");  // weighted loss overflows to inf
    std::ostringstream out, err;
    CHECK(cmd_train(args, out, err) == kDiverged);
    CHECK(err.str().find("error:") != std::string::npos);
}

TEST_CASE("generate samples a deterministic denormalized csv with manifest") {
    TempDir dir;
    CommonArgs train_args;
    train_args.overrides = tiny_train_overrides(dir.file("run"));
    std::ostringstream tout, terr;
    REQUIRE(cmd_train(train_args, tout, terr) == kOk);

    GenerateArgs gen;
    gen.checkpoint = dir.file("run/last.ckpt");
    gen.out_csv = dir.file("syn.csv");
    gen.count = 2;
    gen.seed = 21;
    std::ostringstream out, err;
    REQUIRE(cmd_generate(gen, out, err) == kOk);

    const std::string csv = slurp(dir.file("syn.csv"));
    CHECK(line_count(csv) == 1 + 2 * 8);  // header + count*tau rows
    CHECK(fs::exists(dir.file("syn.csv.manifest.json")));
    const std::string manifest = slurp(dir.file("syn.csv.manifest.json"));
    CHECK(manifest.find("\"mode\": \"prior\"") != std::string::npos);
    CHECK(manifest.find("\"seed\": 21") != std::string::npos);
    CHECK(manifest.find("checkpoint_digest") != std::string::npos);

    // Denormalized output stays inside the source data's bounds.
    const NormalizationParams params = params_from_json(slurp(dir.file("run/normalization.json")));
    const RawSeries parsed = parse_csv_text(csv, HeaderMode::always, "syn.csv");
    for (std::size_t t = 0; t < parsed.steps; ++t) {
        for (std::size_t f = 0; f < parsed.features; ++f) {
            CHECK(parsed.at(t, f) >= params.min[f] - 1e-9);
            CHECK(parsed.at(t, f) <= params.max[f] + 1e-9);
        }
    }

    gen.out_csv = dir.file("syn2.csv");
    std::ostringstream out2, err2;
    REQUIRE(cmd_generate(gen, out2, err2) == kOk);
    CHECK(slurp(dir.file("syn.csv")) == slurp(dir.file("syn2.csv")));
}

TEST_CASE("generate reconstruct mode re-encodes source sequences") {
    TempDir dir;
    CommonArgs train_args;
    train_args.overrides = tiny_train_overrides(dir.file("run"));
    std::ostringstream tout, terr;
    REQUIRE(cmd_train(train_args, tout, terr) == kOk);
    const std::string source = toy_csv(dir, "source.csv", 11);

    GenerateArgs gen;
    gen.checkpoint = dir.file("run/last.ckpt");
    gen.out_csv = dir.file("rec.csv");
    gen.count = 3;
    gen.mode = "reconstruct";
    gen.data = source;
    std::ostringstream out, err;
    INFO(err.str());
    REQUIRE(cmd_generate(gen, out, err) == kOk);
    CHECK(line_count(slurp(dir.file("rec.csv"))) == 1 + 3 * 8);

    gen.data.clear();
    std::ostringstream out2, err2;
    CHECK(cmd_generate(gen, out2, err2) == kUsage);
}

TEST_CASE("generate rejects bad requests and corrupt checkpoints") {
    TempDir dir;
    GenerateArgs gen;
    gen.checkpoint = dir.file("none.ckpt");
    gen.out_csv = dir.file("o.csv");
    std::ostringstream out, err;
    CHECK(cmd_generate(gen, out, err) == kUsage);

    CommonArgs train_args;
    train_args.overrides = tiny_train_overrides(dir.file("run"));
    std::ostringstream tout, terr;
    REQUIRE(cmd_train(train_args, tout, terr) == kOk);

    gen.checkpoint = dir.file("run/last.ckpt");
    gen.mode = "sideways";
    std::ostringstream out2, err2;
    CHECK(cmd_generate(gen, out2, err2) == kUsage);

    gen.mode = "prior";
    gen.count = 0;
    std::ostringstream out3, err3;
    CHECK(cmd_generate(gen, out3, err3) == kUsage);

    // Corrupt the checkpoint payload: digest verification must refuse it.
    gen.count = 1;
    std::string bytes = slurp(dir.file("run/last.ckpt"));
    bytes[bytes.size() - 3] = static_cast<char>(bytes[bytes.size() - 3] ^ 0x01);
    spit(dir.file("run/last.ckpt"), bytes);
    std::ostringstream out4, err4;
    CHECK(cmd_generate(gen, out4, err4) == kUsage);
    CHECK(err4.str().find("digest") != std::string::npos);
}

TEST_CASE("eval scores real against synthetic and writes reports") {
    TempDir dir;
    const std::string real = toy_csv(dir, "real.csv", 1);
    const std::string syn = toy_csv(dir, "syn.csv", 2);
    REQUIRE(train_embedder_at(dir, real, dir.file("emb")) == kOk);

    EvalArgs args;
    args.metric = "both";
    args.real_csv = real;
    args.synthetic_csv = syn;
    args.embedder_checkpoint = dir.file("emb/embedder.ckpt");
    args.out_prefix = dir.file("report/toy");
    args.common.overrides = {"tau=8",           "runs=2",
                             "seed=5",          "horizon=2",
                             "forecast_hidden=4", "forecast_layers=1",
                             "forecast_epochs=1"};
    std::ostringstream out, err;
    INFO(err.str());
    REQUIRE(cmd_eval(args, out, err) == kOk);

    const std::string csv = slurp(dir.file("report/toy.csv"));
    CHECK(csv.find("ftd") != std::string::npos);
    CHECK(csv.find("predictive_mae") != std::string::npos);
    CHECK(line_count(csv) == 3);  // header + one row per metric
    CHECK(fs::exists(dir.file("report/toy.json")));
    CHECK(out.str().find("real,8,full,") != std::string::npos);

    // Determinism: the same invocation reproduces the report bytes.
    args.out_prefix = dir.file("report/toy2");
    std::ostringstream out2, err2;
    REQUIRE(cmd_eval(args, out2, err2) == kOk);
    CHECK(slurp(dir.file("report/toy2.csv")) == csv);
}

TEST_CASE("eval of real data against itself reports zero distance") {
    TempDir dir;
    const std::string real = toy_csv(dir, "real.csv", 1);
    REQUIRE(train_embedder_at(dir, real, dir.file("emb")) == kOk);

    EvalArgs args;
    args.metric = "ftd";
    args.real_csv = real;
    args.synthetic_csv = real;
    args.embedder_checkpoint = dir.file("emb/embedder.ckpt");
    args.common.overrides = {"tau=8", "runs=3", "seed=5"};
    std::ostringstream out, err;
    INFO(err.str());
    REQUIRE(cmd_eval(args, out, err) == kOk);

    // Parse the mean out of "real,8,full,ftd,<mean>,<std>,3".
    const std::string line = out.str();
    const std::string key = ",ftd,";
    const auto at = line.find(key);
    REQUIRE(at != std::string::npos);
    const double mean = std::stod(line.substr(at + key.size()));
    CHECK(mean <= 1e-8);
    CHECK(mean >= 0.0);
}

TEST_CASE("eval rejects mismatched requests with exit code 2") {
    TempDir dir;
    const std::string real = toy_csv(dir, "real.csv", 1);
    const std::string syn = toy_csv(dir, "syn.csv", 2);

    EvalArgs args;
    args.metric = "sideways";
    args.real_csv = real;
    args.synthetic_csv = syn;
    std::ostringstream out, err;
    CHECK(cmd_eval(args, out, err) == kUsage);

    args.metric = "ftd";
    args.embedder_checkpoint = "";  // required for ftd
    std::ostringstream out2, err2;
    CHECK(cmd_eval(args, out2, err2) == kUsage);
    CHECK(err2.str().find("embedder") != std::string::npos);

    REQUIRE(train_embedder_at(dir, real, dir.file("emb")) == kOk);
    args.embedder_checkpoint = dir.file("emb/embedder.ckpt");
    args.common.overrides = {"tau=7"};  // 64 rows are not a multiple of 7
    std::ostringstream out3, err3;
    CHECK(cmd_eval(args, out3, err3) == kUsage);
    CHECK(err3.str().find("multiple of tau") != std::string::npos);

    args.common.overrides = {"tau=8", "runs=0"};
    std::ostringstream out4, err4;
    CHECK(cmd_eval(args, out4, err4) == kUsage);
}

TEST_CASE("train-embedder writes a loadable checkpoint and a log") {
    TempDir dir;
    const std::string real = toy_csv(dir, "real.csv", 1);
    REQUIRE(train_embedder_at(dir, real, dir.file("emb")) == kOk);

    const Checkpoint ck = load_checkpoint(dir.file("emb/embedder.ckpt"));
    CHECK(ck.kind == "embedder");
    const std::string log = slurp(dir.file("emb/embedder_log.csv"));
    CHECK(log.rfind("epoch,train_mse,val_mse\n", 0) == 0);
    CHECK(line_count(log) == 3);  // header + 2 epochs

    REQUIRE(train_embedder_at(dir, real, dir.file("emb2")) == kOk);
    CHECK(slurp(dir.file("emb2/embedder.ckpt")) == slurp(dir.file("emb/embedder.ckpt")));
}

TEST_CASE("ablate trains each requested variant and reports both metrics") {
    TempDir dir;
    AblateArgs args;
    args.variants = {"full", "no_reconstruction_loss"};
    args.common.overrides = {
        "data=toy:coupled_sines", "out=" + dir.file("ab"), "tau=8",
        "toy_windows=8",          "toy_features=3",        "latent=4",
        "attention_pairs=1",      "ffn_depth=1",           "epochs=1",
        "batch_size=4",           "runs=1",                "seed=11",
        "embed_dim=8",            "embed_epochs=2",        "embed_batch=4",
        "horizon=2",              "forecast_hidden=4",     "forecast_layers=1",
        "forecast_epochs=1",
    };
    std::ostringstream out, err;
    INFO(err.str());
    REQUIRE(cmd_ablate(args, out, err) == kOk);

    const std::string csv = slurp(dir.file("ab/ablation_report.csv"));
    CHECK(line_count(csv) == 5);  // header + 2 variants x 2 metrics
    CHECK(csv.find("full,ftd") != std::string::npos);
    CHECK(csv.find("no_reconstruction_loss,ftd") != std::string::npos);
    CHECK(csv.find("no_reconstruction_loss,predictive_mae") != std::string::npos);

    const std::string json = slurp(dir.file("ab/ablation_report.json"));
    CHECK(json.find("ftd_vs_predictive_pearson_r") != std::string::npos);

    CHECK(fs::exists(dir.file("ab/full/last.ckpt")));
    CHECK(fs::exists(dir.file("ab/full/loss_log.csv")));
    CHECK(fs::exists(dir.file("ab/no_reconstruction_loss/last.ckpt")));

    AblateArgs bad = args;
    bad.variants = {"no_everything"};
    std::ostringstream out2, err2;
    CHECK(cmd_ablate(bad, out2, err2) == kUsage);
    CHECK(err2.str().find("no_decoder") != std::string::npos);
}
