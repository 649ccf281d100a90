#include "commands.hpp"

#include "fobs/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using fobs::cli::RunConfig;

void add_system_options(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("system", cfg.system_path, "System JSON file");
    sub.add_option("--builtin", cfg.builtin, "Builtin system: batch-reactor, cstr, double-integrator");
    sub.add_option("--linear", cfg.linear_path, "Linear system JSON file (F, H, q)");
    sub.add_option("--param", cfg.param_overrides, "Override a parameter, name=value (repeatable)")
        ->allow_extra_args(false);
    sub.add_option("--box", cfg.box_overrides, "Override a sampling box, state=lo:hi (repeatable)")
        ->allow_extra_args(false);
    sub.add_option("--samples", cfg.samples, "Number of sample points")->capture_default_str();
    sub.add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();
    sub.add_option("--out", cfg.out, "Directory for JSON/CSV artifacts");
}

void add_synthesis_options(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--psi", cfg.psi_path, "Psi representation JSON file");
    sub.add_option("--poles", cfg.poles, "Observer poles, e.g. \"-1,-2\" or \"-1+1i,-1-1i\"");
    sub.add_option("--v-max", cfg.v_max, "Largest functional index searched")->capture_default_str();
    sub.add_flag("--allow-unstable", cfg.allow_unstable, "Accept a non-Hurwitz error polynomial");
}

void add_simulation_options(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--dt", cfg.dt, "RK4 step")->capture_default_str();
    sub.add_option("--t-final", cfg.t_final, "Simulation horizon")->capture_default_str();
    sub.add_option("--x0", cfg.x0, "Initial plant state, comma separated (default: box midpoint)");
    sub.add_option("--init", cfg.init, "Observer start: exact | offset=<r> | explicit=<list>")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fobs: functional observability analysis and functional observer synthesis"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* analyze = app.add_subcommand("analyze", "Rank tests and functional index search");
    add_system_options(*analyze, cfg);
    analyze->add_option("--psi", cfg.psi_path, "Psi representation JSON file to verify");
    analyze->add_option("--m-max", cfg.m_max, "Largest Lie-derivative order examined")->capture_default_str();
    analyze->add_option("--v-max", cfg.v_max, "Largest functional index searched")->capture_default_str();

    auto* synthesize = app.add_subcommand("synthesize", "Build a functional observer for given poles");
    add_system_options(*synthesize, cfg);
    add_synthesis_options(*synthesize, cfg);

    auto* simulate = app.add_subcommand("simulate", "Simulate plant and observer with RK4");
    add_system_options(*simulate, cfg);
    add_synthesis_options(*simulate, cfg);
    add_simulation_options(*simulate, cfg);
    simulate->add_option("--observer", cfg.observer_path, "Observer JSON produced by synthesize");

    auto* sweep = app.add_subcommand("sweep", "Simulate several pole sets concurrently (sets separated by ';')");
    add_system_options(*sweep, cfg);
    add_synthesis_options(*sweep, cfg);
    add_simulation_options(*sweep, cfg);

    auto* demo = app.add_subcommand("demo", "Run a worked example end to end");
    demo->add_option("name", cfg.demo, "batch | cstr | linear")->required();
    demo->add_option("--out", cfg.out, "Artifact directory (default demo-<name>)");
    add_simulation_options(*demo, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return fobs::cli::kInputError;
    }

    try {
        cfg.command = app.get_subcommands().front()->get_name();
        if (*analyze) return fobs::cli::cmd_analyze(cfg, std::cout);
        if (*synthesize) return fobs::cli::cmd_synthesize(cfg, std::cout);
        if (*simulate) return fobs::cli::cmd_simulate(cfg, std::cout);
        if (*sweep) return fobs::cli::cmd_sweep(cfg, std::cout);
        return fobs::cli::cmd_demo(cfg, std::cout);
    } catch (const fobs::UnstableError& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return fobs::cli::kRefusedUnstable;
    } catch (const fobs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fobs::cli::kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fobs::cli::kInputError;
    }
}
