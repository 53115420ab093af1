#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ruperlb/scenario.hpp"
#include "ruperlb/worker.hpp"

namespace ruperlb {

/// The scenario cannot finish: the aggregate speed never accumulates the
/// budget, or the run exceeded its virtual-time cap.
class NonTerminating : public Error {
public:
    using Error::Error;
};

enum class TimelineKind { Report, Checkpoint, Reassign, FinishRequest, FinishGrant, Speed };

const char* to_string(TimelineKind kind);

/// One row of timeline.csv. `thread` is -1 for process-level events
/// (checkpoints and coordinator reassignments).
///
/// Values: report and finish_* carry the thread's done count, checkpoint the
/// task budget, reassign the new assignment and speed the thread's mean speed
/// since it started.
struct TimelineEvent {
    Seconds time = 0.0;
    Rank rank = 0;
    int thread = -1;
    TimelineKind kind = TimelineKind::Report;
    double value = 0.0;

    friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

struct ThreadResult {
    Rank rank = 0;
    std::size_t thread = 0;
    Seconds finish = 0.0;
    Iterations iterations = 0;
    Seconds last_report = 0.0;     ///< time of the thread's last report
    Seconds last_interval = 0.0;   ///< last suggested report interval
    double final_speed = 0.0;      ///< profile speed at finish

    friend bool operator==(const ThreadResult&, const ThreadResult&) = default;
};

/// Assignment-conservation bookkeeping gathered while a run executes.
struct ConservationStats {
    std::size_t checks = 0;
    std::size_t violations = 0;
    std::vector<std::string> first_violations; ///< up to 10 descriptions

    friend bool operator==(const ConservationStats&, const ConservationStats&) = default;
};

struct ScenarioResult {
    std::string scenario;
    RunMode mode = RunMode::Balanced;
    Iterations budget = 0;
    std::vector<ThreadResult> threads; ///< rank-major order
    std::vector<Seconds> rank_finish;
    Seconds makespan = 0.0;
    Seconds ideal_makespan = 0.0;
    Iterations total_executed = 0;
    double overshoot_bound = 0.0;
    ConservationStats conservation;
    std::size_t checkpoints = 0;
    std::size_t redistributions = 0;
    std::size_t coordinator_rebalances = 0;
    std::vector<TimelineEvent> timeline;
    /// measures[rank][thread]: speed history of every thread worker.
    std::vector<std::vector<std::vector<SpeedMeasure>>> measures;

    Iterations overshoot() const noexcept { return total_executed - budget; }
    Seconds rank_spread() const;
    Seconds thread_spread(Rank rank) const;
    Seconds max_thread_spread() const;
    double relative_rank_spread() const { return makespan > 0.0 ? rank_spread() / makespan : 0.0; }

    friend bool operator==(const ScenarioResult&, const ScenarioResult&) = default;
};

/// Runs one scenario on a virtual clock in the given mode (Balanced or
/// Static).
ScenarioResult run_scenario(const ScenarioConfig& cfg, RunMode mode);

/// Runs the scenario in its configured mode.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    return run_scenario(cfg, cfg.mode == RunMode::Both ? RunMode::Balanced : cfg.mode);
}

struct Comparison {
    ScenarioResult balanced;
    ScenarioResult static_split;
    double makespan_ratio = 0.0; ///< balanced / static
};

Comparison compare_modes(const ScenarioConfig& cfg);

/// Earliest time at which all threads together could have completed the
/// budget (the aggregate speed integral reaches it). Throws NonTerminating if
/// it never does.
Seconds ideal_makespan(const ScenarioConfig& cfg);

/// Speed of one thread including jitter.
double thread_speed(const ScenarioConfig& cfg, Rank rank, std::size_t thread, Seconds t);

} // namespace ruperlb
