#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ruperlb/demo.hpp"
#include "ruperlb/scenario.hpp"
#include "ruperlb/simulator.hpp"

namespace ruperlb::cli {

enum ExitCode : int {
    kPass = 0,
    kCheckFailed = 1,
    kConfigError = 2,
    kRuntimeAbort = 3,
};

struct CheckOutcome {
    CheckSpec spec;
    std::optional<double> observed; ///< empty when the check's mode was not run
    bool pass = false;
};

struct RunReport {
    std::string scenario;
    std::vector<CheckOutcome> checks;
    std::vector<std::filesystem::path> outputs;

    bool passed() const;
};

/// Value of a named metric on one result.
double metric_value(const std::string& metric, const ScenarioResult& result);

/// Evaluates every check of the scenario. Checks on a mode that was not run
/// are reported with no observed value and fail.
std::vector<CheckOutcome> evaluate_checks(const ScenarioConfig& cfg, const ScenarioResult* balanced,
                                          const ScenarioResult* static_split,
                                          const Comparison* comparison);

struct RunOptions {
    std::filesystem::path scenario;
    std::filesystem::path out;
    std::optional<RunMode> mode;
    std::optional<std::uint64_t> seed;
};

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_validate(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err);
int cmd_demo(const DemoOptions& options, const std::optional<std::filesystem::path>& out_dir,
             std::ostream& out, std::ostream& err);

/// Parses the command line and dispatches. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ruperlb::cli
