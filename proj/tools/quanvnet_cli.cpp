// quanvnet command-line harness.
//
// Subcommands: validate-appendix, precompute-features, train, dataset gen,
// dataset split. Experiments are described by a key=value config file; a
// handful of flags override individual keys. Exit codes: 0 success,
// 1 validation failure, 2 config/IO error.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "quanvnet/harness.hpp"

namespace {

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> shots;
    std::optional<std::uint64_t> budget;
    std::optional<int> replicas;
    std::optional<unsigned> threads;
};

quanvnet::ExperimentConfig resolve_config(const std::string& config_path,
                                          const ConfigOverrides& ov) {
    quanvnet::ExperimentConfig cfg = quanvnet::load_config_file(config_path);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.mode) cfg.mode = *ov.mode;
    if (ov.shots) cfg.shots = *ov.shots;
    if (ov.budget) cfg.budget = *ov.budget;
    if (ov.replicas) cfg.replicas = *ov.replicas;
    if (ov.threads) cfg.threads = *ov.threads;
    return cfg;
}

void add_override_flags(CLI::App* cmd, ConfigOverrides& ov) {
    cmd->add_option("--seed", ov.seed, "override the config's base seed");
    cmd->add_option("--mode", ov.mode, "override mode (exact|shots)")
        ->check(CLI::IsMember({"exact", "shots"}));
    cmd->add_option("--shots", ov.shots, "override the per-filter shot count");
    cmd->add_option("--budget", ov.budget, "override the exact-evaluation budget (0 = all blocks)");
    cmd->add_option("--replicas", ov.replicas, "override the replica count");
    cmd->add_option("--threads", ov.threads, "override the worker thread count");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quanvolutional network experiment harness"};
    app.require_subcommand(1);

    // validate-appendix
    int resolution = 64;
    std::string va_out = "appendix.csv";
    CLI::App* validate = app.add_subcommand(
        "validate-appendix", "sweep the 2-qubit QAOA circuit against the analytic curve");
    validate->add_option("--resolution", resolution, "theta samples per beta (default 64)")
        ->check(CLI::Range(2, 1 << 20));
    validate->add_option("--out", va_out, "output CSV path");

    // precompute-features
    std::string pf_config;
    std::string pf_out = ".";
    ConfigOverrides pf_ov;
    CLI::App* precompute = app.add_subcommand(
        "precompute-features", "run the quanvolutional layer over a dataset and persist features");
    precompute->add_option("--config", pf_config, "experiment config file")->required();
    precompute->add_option("--out", pf_out, "output directory");
    add_override_flags(precompute, pf_ov);

    // train
    std::string tr_config;
    std::string tr_out = ".";
    ConfigOverrides tr_ov;
    CLI::App* train_cmd =
        app.add_subcommand("train", "train CNN or QNN replicas and emit metric streams");
    train_cmd->add_option("--config", tr_config, "experiment config file")->required();
    train_cmd->add_option("--out", tr_out, "output directory");
    add_override_flags(train_cmd, tr_ov);

    // dataset gen / dataset split
    CLI::App* dataset = app.add_subcommand("dataset", "dataset utilities");
    dataset->require_subcommand(1);

    std::size_t gen_count = 100;
    std::uint64_t gen_seed = 7;
    std::string gen_out = "dataset.csv";
    CLI::App* gen = dataset->add_subcommand("gen", "generate the synthetic 4-class dataset");
    gen->add_option("--count-per-class", gen_count, "images per class")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output CSV path (.gz for compressed)");

    std::string split_in;
    std::size_t split_train = 0, split_test = 0;
    std::uint64_t split_seed = 3;
    std::string split_out_train = "train.csv", split_out_test = "test.csv";
    CLI::App* split = dataset->add_subcommand("split", "deterministic train/test split");
    split->add_option("--in", split_in, "input dataset CSV")->required();
    split->add_option("--train", split_train, "train row count")->required();
    split->add_option("--test", split_test, "test row count")->required();
    split->add_option("--seed", split_seed, "shuffle seed");
    split->add_option("--out-train", split_out_train, "train output path");
    split->add_option("--out-test", split_out_test, "test output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed())
            return quanvnet::cmd_validate_appendix(resolution, va_out);
        if (precompute->parsed())
            return quanvnet::cmd_precompute_features(resolve_config(pf_config, pf_ov), pf_out);
        if (train_cmd->parsed())
            return quanvnet::cmd_train(resolve_config(tr_config, tr_ov), tr_out);
        if (gen->parsed())
            return quanvnet::cmd_dataset_gen(gen_count, gen_seed, gen_out);
        if (split->parsed())
            return quanvnet::cmd_dataset_split(split_in, split_train, split_test, split_seed,
                                               split_out_train, split_out_test);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return quanvnet::kExitConfigError;
    }
    return quanvnet::kExitConfigError;
}
