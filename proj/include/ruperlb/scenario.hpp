#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruperlb/profile.hpp"
#include "ruperlb/redistribution.hpp"

namespace ruperlb {

/// Malformed or out-of-range scenario. The message names the offending line
/// or key.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class RunMode { Balanced, Static, Both };

const char* to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

/// Multiplicative noise on profile speeds: every `window_s` seconds each
/// thread draws a factor uniformly from [1 - amplitude, 1 + amplitude].
struct JitterSpec {
    double amplitude = 0.0; ///< 0 disables jitter
    Seconds window = 10.0;

    bool enabled() const noexcept { return amplitude > 0.0; }
    friend bool operator==(const JitterSpec&, const JitterSpec&) = default;
};

/// A pass/fail bound evaluated on a finished run, e.g. rank_spread < 30.
struct CheckSpec {
    std::string metric;
    std::string mode; ///< balanced, static or comparison
    std::string op;   ///< <, <=, >, >=, ==
    double bound = 0.0;

    friend bool operator==(const CheckSpec&, const CheckSpec&) = default;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::size_t process_count = 1;
    std::size_t threads_per_process = 1;
    Iterations global_budget = 0;
    BalanceParams params;
    Seconds initial_report_interval = 5.0;
    std::uint64_t rng_seed = 0;
    JitterSpec jitter;
    RunMode mode = RunMode::Balanced;
    /// profiles[rank][thread]
    std::vector<std::vector<SpeedProfile>> profiles;
    std::vector<CheckSpec> checks;
    /// Runs are aborted past this multiple of the ideal makespan.
    double time_cap_factor = 100.0;

    std::size_t total_threads() const noexcept { return process_count * threads_per_process; }

    /// Throws ConfigError describing the first invalid field.
    void validate() const;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Parses a JSON scenario document. `source` names it in error messages.
ScenarioConfig parse_scenario(std::string_view text, const std::string& source = "<scenario>");

/// Reads and parses a scenario file. Missing files raise ConfigError.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Normalized JSON rendering with every default made explicit.
std::string dump_scenario(const ScenarioConfig& cfg);

/// Scenario with every thread of every rank running `profile`.
std::vector<std::vector<SpeedProfile>> uniform_profiles(std::size_t process_count,
                                                        std::size_t threads_per_process,
                                                        const SpeedProfile& profile);

} // namespace ruperlb
