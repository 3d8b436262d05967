// pavsim command line harness.

#include "pavsim/config.hpp"
#include "pavsim/errors.hpp"
#include "pavsim/experiments.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonOptions {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::string preset = "default";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Scenario config file (key = value)");
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Random seed override");
    cmd->add_option("--preset", o.preset, "Scenario preset")->capture_default_str();
}

pavsim::ScenarioConfig resolve(const CommonOptions& o) {
    auto cfg = pavsim::preset_config(o.preset);
    if (!o.config.empty()) cfg = pavsim::load_config(o.config, cfg);
    if (o.seed) cfg.seed = *o.seed;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed PAV traffic: simulation, equilibria, stability and throughput"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string axis = "gamma";
    std::string profile;
    bool list_presets = false;

    auto* simulate = app.add_subcommand("simulate", "Trajectory, throughput and phase-plane series");
    auto* compare = app.add_subcommand("compare", "Leader-dependent system against its matched baseline");
    auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep");
    auto* ngsim = app.add_subcommand("ngsim", "Paired throughput along a speed profile");
    auto* scan = app.add_subcommand("stability-scan", "Common Lyapunov certificates over a rate grid");
    auto* erlang = app.add_subcommand("erlang-check", "W1 distance of Erlang-k to the fixed lockout");
    auto* oracle = app.add_subcommand("oracle-validate", "Particle simulation against the ODE");
    auto* equilibrium = app.add_subcommand("equilibrium", "Equilibrium state and steady throughput");
    auto* presets = app.add_subcommand("presets", "List presets or print one as a config");
    for (auto* cmd : {simulate, compare, sweep, ngsim, scan, erlang, oracle, equilibrium, presets}) add_common(cmd, opts);
    sweep->add_option("--axis", axis, "gamma | initial_fraction | rate_grid")
        ->check(CLI::IsMember({"gamma", "initial_fraction", "rate_grid"}))
        ->capture_default_str();
    ngsim->add_option("--profile", profile, "Speed CSV with header time_s,speed_mps");
    presets->add_flag("--list", list_presets, "Only list preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto cfg = resolve(opts);
        const std::filesystem::path out = opts.out;
        pavsim::OutputFiles files;
        if (presets->parsed()) {
            if (list_presets) {
                for (const auto& name : pavsim::preset_names()) std::cout << name << '\n';
            } else {
                std::cout << pavsim::serialize_config(cfg);
            }
            return 0;
        }
        if (simulate->parsed()) files = pavsim::cmd_simulate(cfg, out);
        if (compare->parsed()) files = pavsim::cmd_compare(cfg, out);
        if (sweep->parsed()) files = pavsim::cmd_sweep(cfg, axis, out);
        if (ngsim->parsed()) files = pavsim::cmd_ngsim(cfg, profile, out);
        if (scan->parsed()) files = pavsim::cmd_stability_scan(cfg, out);
        if (erlang->parsed()) files = pavsim::cmd_erlang_check(cfg, out);
        if (oracle->parsed()) files = pavsim::cmd_oracle_validate(cfg, out);
        if (equilibrium->parsed()) files = pavsim::cmd_equilibrium(cfg, out);
        for (const auto& f : files) std::cout << f.string() << '\n';
        return 0;
    } catch (const pavsim::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const pavsim::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
}
