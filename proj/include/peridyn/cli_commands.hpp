#pragma once

#include <optional>

#include "peridyn/config.hpp"

namespace peridyn::cli {

/// Command-line overrides layered on top of the config file.
struct Overrides {
    std::string out;
    std::string precision;
    std::string variant;
    std::string restart;
    std::optional<Index> first_step;
};

void apply_overrides(config::RunConfig& cfg, const Overrides& overrides);

/// The four workflows behind the subcommands.  They throw on failure;
/// run_command maps exceptions to exit codes.
void cmd_build(const config::RunConfig& cfg);
void cmd_run(const config::RunConfig& cfg, const Overrides& overrides);
void cmd_bench(const config::RunConfig& cfg);
void cmd_calibrate(const config::RunConfig& cfg);

/// Parse the config, apply overrides and dispatch.  Returns the process exit
/// code: 0 success, 1 validation error, 2 runtime failure.
int run_command(const std::string& command, const std::string& config_path,
                const Overrides& overrides);

} // namespace peridyn::cli
