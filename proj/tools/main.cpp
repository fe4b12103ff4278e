#include <CLI11.hpp>

#include "peridyn/cli_commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"peridyn - mesh-free bond-based peridynamics solver"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    peridyn::cli::Overrides overrides;
    long long first_step = -1;

    app.add_option("--config", config_path, "path to the key=value run configuration")->required();
    app.add_option("--out", overrides.out, "output directory (overrides 'out' in the config)");
    app.add_option("--precision", overrides.precision, "f32 or f64 (must match the build)")
        ->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--variant", overrides.variant, "force kernel: bpr or node")
        ->check(CLI::IsMember({"bpr", "node"}));
    app.add_option("--restart", overrides.restart, "resume from a saved state file (run only)");
    app.add_option("--first-step", first_step, "absolute step to resume at (run only)");

    app.add_subcommand("build", "build the family and corrections and write the cache");
    app.add_subcommand("run", "run a simulation and write snapshots and tip series");
    app.add_subcommand("bench", "run the scaling benchmark suite");
    app.add_subcommand("calibrate", "fit trilinear parameters against an experiment curve");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (first_step >= 0)
        overrides.first_step = peridyn::Index(first_step);

    const std::string command = app.get_subcommands().front()->get_name();
    return peridyn::cli::run_command(command, config_path, overrides);
}
