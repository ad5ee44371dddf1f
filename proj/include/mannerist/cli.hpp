#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mannerist/ocsvm.hpp"
#include "mannerist/pipeline.hpp"

namespace mannerist {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitIo = 2,
    kExitInsufficientData = 3,
    kExitIncompatible = 4,
    kExitSolver = 5,
};

/// Settings shared by the subcommands. Precedence: flags, then the
/// `--config` file (flat `key = value` lines), then these defaults.
struct RunConfig {
    PipelineConfig pipeline;
    double fps = 30.0;
    std::vector<double> gammas = HyperGrid::defaults().gammas;
    std::vector<double> nus = HyperGrid::defaults().nus;
    std::optional<double> calibration_target;  // family default when unset
    double validation_fraction = 0.25;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::string output;
};

/// Runs the command line `args` (args[0] is the program name). Data goes to
/// `out`, logs and diagnostics to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mannerist
