#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fobs::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kRefusedUnstable = 3,
    kDiverged = 4,
};

struct RunConfig {
    std::string command;
    std::optional<std::string> system_path;
    std::optional<std::string> builtin;
    std::optional<std::string> linear_path;
    std::optional<std::string> psi_path;
    std::optional<std::string> observer_path;
    std::vector<std::string> param_overrides;  // name=value
    std::vector<std::string> box_overrides;    // name=lo:hi
    std::string poles;
    int samples = 100;
    std::uint64_t seed = 42;
    int m_max = 6;
    int v_max = 3;
    double dt = 1e-3;
    double t_final = 10.0;
    std::string x0;
    std::string init = "exact";
    bool allow_unstable = false;
    std::optional<std::string> out;
    std::string demo;
};

/// Throws fobs::ValidationError on out-of-range fields.
void validate(const RunConfig& cfg);

/// Each command writes its report to `os`, artifacts under cfg.out, and
/// returns an exit code. Library errors propagate to the caller.
int cmd_analyze(const RunConfig& cfg, std::ostream& os);
int cmd_synthesize(const RunConfig& cfg, std::ostream& os);
int cmd_simulate(const RunConfig& cfg, std::ostream& os);
int cmd_demo(const RunConfig& cfg, std::ostream& os);
int cmd_sweep(const RunConfig& cfg, std::ostream& os);

} // namespace fobs::cli
