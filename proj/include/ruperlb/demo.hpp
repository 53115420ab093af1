#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ruperlb/random.hpp"
#include "ruperlb/redistribution.hpp"

namespace ruperlb {

/// Seed of demo thread `thread` on rank `rank`.
std::uint64_t demo_thread_seed(std::uint64_t seed, Rank rank, std::size_t thread) noexcept;

struct DemoOptions {
    std::size_t threads = 4;
    Iterations budget = 4'000'000;
    BalanceParams params = BalanceParams::with_defaults(2.0);
    std::uint64_t seed = 1;
    std::optional<std::string> listen;  ///< rank 0 of a multi-process run
    std::optional<std::string> connect; ///< rank > 0 of a multi-process run
    Rank rank = 0;
    std::size_t procs = 1;
    Seconds connect_timeout = 20.0;
};

struct DemoThreadResult {
    std::size_t thread = 0;
    Iterations iterations = 0;
    std::uint64_t hits = 0;
    Seconds finish = 0.0; ///< seconds since the local task started
};

struct DemoResult {
    Rank rank = 0;
    std::size_t procs = 1;
    std::vector<DemoThreadResult> threads;
    Iterations executed = 0;
    std::uint64_t hits = 0;
    Iterations local_budget = 0; ///< final budget of this process
    double pi = 0.0;             ///< estimate from this process's points
    Seconds spread = 0.0;        ///< max - min thread finish time

    std::size_t conservation_checks = 0;
    std::size_t conservation_violations = 0;

    /// Rank 0 of a multi-process run: frozen per-process assignments.
    std::vector<Iterations> process_assignments;

    bool local_ok() const { return conservation_violations == 0 && executed >= local_budget; }
    bool global_ok(Iterations global_budget) const;
};

/// Runs the Monte Carlo pi demo on real threads. Throws ProtocolError for
/// transport failures and InvalidArgument for bad options.
DemoResult run_demo(const DemoOptions& options);

} // namespace ruperlb
