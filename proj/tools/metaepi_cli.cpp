#include "metaepi/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace metaepi;

namespace {

struct Overrides {
    std::string config;
    std::string out = ".";
    std::optional<double> tol_rel, tol_abs, t_end;
    std::vector<double> seed_grid;
};

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config, "scenario file (JSON object)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output directory")->capture_default_str();
    cmd->add_option("--tol-rel", o.tol_rel, "integrator relative tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--tol-abs", o.tol_abs, "integrator absolute tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--t-end", o.t_end, "integration horizon")->check(CLI::PositiveNumber);
    cmd->add_option("--seed-grid", o.seed_grid, "per-component Newton seed values")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
}

int run(int (*command)(const ScenarioConfig&, const std::filesystem::path&, std::ostream&), const Overrides& o)
{
    ScenarioConfig cfg;
    try {
        cfg = load_config(o.config);
        if (o.tol_rel) cfg.tol_rel = *o.tol_rel;
        if (o.tol_abs) cfg.tol_abs = *o.tol_abs;
        if (o.t_end) cfg.t_end = *o.t_end;
        if (!o.seed_grid.empty()) cfg.seed_grid = o.seed_grid;
        model_of(cfg);
    }
    catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return ExitConfigError;
    }
    catch (const ModelError& e) {
        std::cerr << "config error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return ExitConfigError;
    }

    try {
        return command(cfg, o.out, std::cerr);
    }
    catch (const ModelError& e) {
        std::cerr << "numeric error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return ExitNumericError;
    }
    catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return ExitNumericError;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-patch epidemic model with saturating migration"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Overrides sim, eq, scan;
    auto* simulate   = app.add_subcommand("simulate", "integrate the scenario and write trajectory.csv + report.json");
    auto* equilibria = app.add_subcommand("equilibria", "equilibrium catalog with feasibility and stability");
    auto* scan_cmd   = app.add_subcommand("scan", "Hopf scan along the configured parameter path");
    auto* verify     = app.add_subcommand("verify", "run the built-in acceptance fixtures");
    add_common(simulate, sim);
    add_common(equilibria, eq);
    add_common(scan_cmd, scan);

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ExitConfigError;
    }

    if (*simulate) return run(cmd_simulate, sim);
    if (*equilibria) return run(cmd_equilibria, eq);
    if (*scan_cmd) return run(cmd_scan, scan);
    if (*verify) return cmd_verify(std::cout);
    return ExitConfigError;
}
