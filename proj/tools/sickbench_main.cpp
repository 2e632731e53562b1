// sickbench — train small cybersickness classifiers on synthetic or recorded
// eye/head streams, attack them with gradient-based methods, and measure
// white-box, black-box and closed-loop robustness.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "sickbench/cli/stages.hpp"

using namespace sickbench;

int main(int argc, char** argv) {
    CLI::App app{"cybersickness detection robustness testbed"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<std::size_t> threads_flag;
    bool reproducible_flag = false;
    app.add_option("--config", config_path, "run configuration JSON")->envname("SICKBENCH_CONFIG");
    app.add_option("--seed", seed_flag, "global seed (overrides config and env)");
    app.add_option("--threads", threads_flag, "worker threads for attacks");
    app.add_flag("--reproducible", reproducible_flag,
                 "timestamp- and latency-free outputs for byte-identical reruns");

    std::string out = "out";
    std::string in_dir, models_dir, model_file, eval_dir;
    std::optional<std::string> transfer_dir;
    std::string bind;
    int port = -1;
    std::string family;

    auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
        if (needs_out) cmd->add_option("--out", out, "output directory");
        cmd->add_option("--family", family, "deeptcn | transformer | both");
        return cmd;
    };

    auto* synth = add_common(app.add_subcommand("synth", "generate the synthetic dataset"));
    auto* preprocess =
        add_common(app.add_subcommand("preprocess", "outlier repair + smoothing over streams"));
    preprocess->add_option("--in", in_dir, "synth output directory")->required();
    auto* train = add_common(app.add_subcommand("train", "train the classifier families"));
    train->add_option("--in", in_dir, "preprocessed dataset directory")->required();
    auto* attack = add_common(app.add_subcommand("attack", "generate adversarial window sets"));
    attack->add_option("--models", models_dir, "train output directory")->required();
    attack->add_option("--in", in_dir, "preprocessed dataset directory")->required();
    auto* eval_cmd = add_common(app.add_subcommand("eval", "white-box robustness tables"));
    eval_cmd->add_option("--models", models_dir, "train output directory")->required();
    eval_cmd->add_option("--in", in_dir, "preprocessed dataset directory")->required();
    auto* transfer = add_common(app.add_subcommand("transfer", "black-box transferability matrix"));
    transfer->add_option("--models", models_dir, "train output directory")->required();
    transfer->add_option("--in", in_dir, "preprocessed dataset directory")->required();
    auto* simulate =
        add_common(app.add_subcommand("simulate", "closed-loop streaming session with mitigation"));
    simulate->add_option("--model", model_file, "trained model file")->required();
    auto* serve = add_common(app.add_subcommand("serve", "HTTP inference service"), false);
    serve->add_option("--model", model_file, "trained model file")->required();
    serve->add_option("--bind", bind, "bind address");
    serve->add_option("--port", port, "port");
    auto* report = add_common(app.add_subcommand("report", "combine eval/transfer outputs"));
    report->add_option("--eval", eval_dir, "eval output directory")->required();
    report->add_option("--transfer", transfer_dir, "transfer output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = cli::RunConfig::load(
            config_path ? std::optional<std::filesystem::path>(*config_path) : std::nullopt,
            seed_flag, threads_flag,
            reproducible_flag ? std::optional<bool>(true) : std::nullopt);
        if (!family.empty()) cfg.family = family;
        if (!bind.empty()) cfg.bind = bind;
        if (port > 0) cfg.port = port;

        if (synth->parsed()) cli::stage_synth(cfg, out);
        if (preprocess->parsed()) cli::stage_preprocess(cfg, in_dir, out);
        if (train->parsed()) cli::stage_train(cfg, in_dir, out);
        if (attack->parsed()) cli::stage_attack(cfg, models_dir, in_dir, out);
        if (eval_cmd->parsed()) cli::stage_eval(cfg, models_dir, in_dir, out);
        if (transfer->parsed()) cli::stage_transfer(cfg, models_dir, in_dir, out);
        if (simulate->parsed()) cli::stage_simulate(cfg, model_file, out);
        if (serve->parsed()) cli::stage_serve(cfg, model_file);
        if (report->parsed())
            cli::stage_report(cfg, eval_dir,
                              transfer_dir ? std::optional<cli::path>(*transfer_dir)
                                           : std::nullopt,
                              out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
