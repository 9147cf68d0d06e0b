// Command-line front end: run, sweep, select, validate, make-dataset.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cbandit/artifacts.hpp"
#include "cbandit/config.hpp"
#include "cbandit/environment.hpp"
#include "cbandit/errors.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
    std::string config;
    std::string out;
    std::optional<unsigned> workers;
};

cbandit::ExperimentConfig load(const Common& c) {
    cbandit::ExperimentConfig cfg = cbandit::parse_config(c.config);
    if (!c.out.empty()) cfg.output.dir = c.out;
    return cfg;
}

unsigned workers_of(const Common& c) {
    const unsigned w = c.workers ? *c.workers : cbandit::default_workers();
    if (w < 1) throw cbandit::ConfigError("--workers must be >= 1");
    return w;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conservative linear bandit experiments"};
    app.require_subcommand(1);

    Common run_opts, sweep_opts;
    auto* run = app.add_subcommand("run", "Run the agents of a config and write curves/summary/manifest");
    run->add_option("config", run_opts.config, "YAML config")->required();
    run->add_option("--out", run_opts.out, "Output directory (overrides output.dir)");
    run->add_option("--workers", run_opts.workers, "Worker threads (default: CBANDIT_WORKERS or all cores)");

    auto* sweep = app.add_subcommand("sweep", "Checkpoint sweep: regret of clucb2t minus linucb per T");
    sweep->add_option("config", sweep_opts.config, "YAML config with checkpoints.sweep")->required();
    sweep->add_option("--out", sweep_opts.out, "Output directory (overrides output.dir)");
    sweep->add_option("--workers", sweep_opts.workers, "Worker threads");

    std::string select_dir, agent_a, agent_b, mode = "worst";
    auto* select = app.add_subcommand("select", "Pick the model where agent a improves least (or most) on b");
    select->add_option("dir", select_dir, "Directory holding summary.json")->required();
    select->add_option("--a", agent_a, "Agent label in the numerator")->required();
    select->add_option("--b", agent_b, "Reference agent label")->required();
    select->add_option("--mode", mode, "worst or best")->check(CLI::IsMember({"worst", "best"}));

    std::string validate_path;
    bool print_config = false;
    auto* validate = app.add_subcommand("validate", "Parse and check a config");
    validate->add_option("config", validate_path, "YAML config")->required();
    validate->add_flag("--print", print_config, "Echo the normalized config");

    std::string ds_out;
    std::int64_t ds_items = 40, ds_users = 100, ds_dim = 10;
    std::uint64_t ds_seed = 0;
    auto* make_ds = app.add_subcommand("make-dataset", "Write a synthetic item/user factor file");
    make_ds->add_option("out", ds_out, "Output file")->required();
    make_ds->add_option("--items", ds_items, "Number of items")->check(CLI::PositiveNumber);
    make_ds->add_option("--users", ds_users, "Number of users")->check(CLI::PositiveNumber);
    make_ds->add_option("--dim", ds_dim, "Factor dimension")->check(CLI::PositiveNumber);
    make_ds->add_option("--seed", ds_seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed()) {
            const auto cfg = load(run_opts);
            const auto summary = cbandit::cmd_run(cfg, workers_of(run_opts));
            std::cout << "wrote " << summary.runs.size() << " runs to " << cfg.output.dir << '\n';
        } else if (sweep->parsed()) {
            const auto cfg = load(sweep_opts);
            const auto points = cbandit::cmd_sweep(cfg, workers_of(sweep_opts));
            cbandit::write_sweep_csv(std::cout, points);
        } else if (select->parsed()) {
            const auto m = mode == "best" ? cbandit::SelectMode::best : cbandit::SelectMode::worst;
            const auto rep = cbandit::cmd_select(select_dir, agent_a, agent_b, m);
            for (const auto& w : rep.selection.warnings) std::cerr << "warning: " << w << '\n';
            cbandit::print_select_report(std::cout, rep, agent_a, agent_b);
        } else if (validate->parsed()) {
            const auto cfg = cbandit::parse_config(validate_path);
            if (print_config) std::cout << cbandit::serialize_config(cfg);
            else std::cout << "ok\n";
        } else if (make_ds->parsed()) {
            cbandit::write_dataset(ds_out, cbandit::gen_synthetic_dataset(ds_seed, ds_items, ds_users, ds_dim));
        }
    } catch (const cbandit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const cbandit::DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
