#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rapid/harness.hpp"

namespace {

struct cli_flags {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<int32_t> gamma;
    std::optional<double> eta;
    std::optional<double> temperature;
    std::optional<std::string> out_dir;
    bool bonus_token = false;
    std::string mutate;
};

void add_common_flags(CLI::App* cmd, cli_flags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config file (key = value lines)");
    cmd->add_option("--seed", flags.seed, "base RNG seed");
    cmd->add_option("--gamma", flags.gamma, "speculative tokens per step");
    cmd->add_option("--eta", flags.eta, "knowledge-transfer strength");
    cmd->add_option("--temperature", flags.temperature, "sampling temperature");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_flag("--bonus-token", flags.bonus_token,
                  "sample one extra target token when a full block is accepted");
}

int build_config(const cli_flags& flags, rapid::experiment_config& cfg) {
    try {
        if (!flags.config_path.empty()) {
            cfg = rapid::load_config_file(flags.config_path);
        }
        if (flags.seed) {
            cfg.engine.seed = *flags.seed;
        }
        if (flags.gamma) {
            cfg.engine.gamma = *flags.gamma;
        }
        if (flags.eta) {
            cfg.engine.eta = *flags.eta;
        }
        if (flags.temperature) {
            cfg.engine.temperature = *flags.temperature;
        }
        if (flags.out_dir) {
            cfg.out_dir = *flags.out_dir;
        }
        if (flags.bonus_token) {
            cfg.engine.bonus_token = true;
        }
        if (!flags.mutate.empty()) {
            cfg.mutate = flags.mutate;
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return rapid::exit_config_error;
    }
    return rapid::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retrieval-augmented speculative decoding engine, oracle and cost model"};
    app.require_subcommand(1);

    cli_flags flags;
    auto* verify = app.add_subcommand("verify", "run the built-in invariant suites");
    auto* simulate = app.add_subcommand("simulate", "run generation on a corpus fixture");
    auto* sweep = app.add_subcommand("sweep", "run generation across an eta grid");
    auto* cost = app.add_subcommand("cost", "evaluate the FLOPs model over context lengths");
    for (auto* cmd : {verify, simulate, sweep, cost}) {
        add_common_flags(cmd, flags);
    }
    verify->add_option("--mutate", flags.mutate,
                       "inject a deliberate defect (suite self-test): kd_sign_flip, tail_skip_renorm");

    CLI11_PARSE(app, argc, argv);

    rapid::experiment_config cfg;
    if (const int rc = build_config(flags, cfg); rc != rapid::exit_ok) {
        return rc;
    }
    if (verify->parsed()) {
        return rapid::run_verify(cfg);
    }
    if (simulate->parsed()) {
        return rapid::run_simulate(cfg);
    }
    if (sweep->parsed()) {
        return rapid::run_sweep(cfg);
    }
    return rapid::run_cost(cfg);
}
