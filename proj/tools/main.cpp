#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <thread>

#include "cpo/config.hpp"
#include "cpo/errors.hpp"
#include "cpo/io.hpp"
#include "cpo/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::int64_t seed_override = -1;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file (JSON)")->required();
    cmd->add_option("--out-dir", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed_override, "override the config's master seed");
    cmd->add_option("--threads", args.threads, "worker threads for replicate loops (0 = hardware)");
}

struct Loaded {
    cpo::ExperimentConfig cfg;
    std::string text;
    cpo::RunPaths paths;
    int threads;
};

Loaded load(const CommonArgs& args) {
    Loaded l{{}, cpo::read_text_file(args.config_path), {args.out_dir}, args.threads};
    l.cfg = cpo::parse_experiment_config(l.text, args.config_path);
    if (args.seed_override >= 0) l.cfg.master_seed = static_cast<std::uint64_t>(args.seed_override);
    if (l.threads <= 0) l.threads = static_cast<int>(std::thread::hardware_concurrency());
    if (l.threads <= 0) l.threads = 1;
    return l;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal preference optimization experiment runner"};
    app.require_subcommand(1);

    CommonArgs sim_args, fit_args, train_args, eval_args, all_args;
    std::string method = "CPO";
    std::string variant;

    auto* sim = app.add_subcommand("simulate", "generate randomized and confounded datasets");
    add_common(sim, sim_args);
    auto* fit = app.add_subcommand("fit-outcome", "fit clean and confounded outcome models");
    add_common(fit, fit_args);
    auto* tr = app.add_subcommand("train", "fit the FT baseline and train one objective");
    add_common(tr, train_args);
    tr->add_option("--method", method, "FT | CPO | DRCPO | OORLHF")->required();
    tr->add_option("--variant", variant, "\"\" (default), \"2\" (reseeded CPO), or \"confounded\"");
    auto* ev = app.add_subcommand("evaluate", "win-rate matrix, reward table, confounding impact");
    add_common(ev, eval_args);
    auto* all = app.add_subcommand("reproduce-all", "full pipeline plus the acceptance suite");
    add_common(all, all_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            auto l = load(sim_args);
            cpo::cmd_simulate(l.cfg, l.text, l.paths);
        } else if (fit->parsed()) {
            auto l = load(fit_args);
            cpo::cmd_fit_outcome(l.cfg, l.text, l.paths);
        } else if (tr->parsed()) {
            auto l = load(train_args);
            cpo::cmd_train(l.cfg, l.text, l.paths, method, variant);
        } else if (ev->parsed()) {
            auto l = load(eval_args);
            cpo::cmd_evaluate(l.cfg, l.text, l.paths);
        } else if (all->parsed()) {
            auto l = load(all_args);
            const int failures = cpo::cmd_reproduce_all(l.cfg, l.text, l.paths, l.threads);
            if (failures > 0) {
                std::cerr << failures << " acceptance criteria or steps failed; see results/report.md\n";
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
