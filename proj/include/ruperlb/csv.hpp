#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ruperlb/simulator.hpp"

namespace ruperlb::csv {

inline constexpr const char* kSummaryHeader = "scenario,mode,rank,thread,finish_s,iterations";
inline constexpr const char* kTimelineHeader = "time_s,rank,thread,event,value";
inline constexpr const char* kMeasuresHeader = "worker_id,elapsed_s,speed_it_per_s";

/// One summary row per thread. Several results may share a file.
void write_summary(std::ostream& out, std::span<const ScenarioResult* const> results);
void write_timeline(std::ostream& out, const ScenarioResult& result);
void write_measures(std::ostream& out, std::span<const std::vector<SpeedMeasure>> workers);

struct SummaryRow {
    std::string scenario;
    std::string mode;
    Rank rank = 0;
    std::size_t thread = 0;
    Seconds finish = 0.0;
    Iterations iterations = 0;
};

void write_summary_rows(std::ostream& out, std::span<const SummaryRow> rows);

/// Writes summary.csv, timeline.csv (or timeline_<mode>.csv when more than one
/// result is given) and measures_rank<r>.csv for balanced runs. Returns the
/// paths written.
std::vector<std::filesystem::path> write_run(const std::filesystem::path& dir,
                                             std::span<const ScenarioResult* const> results);

} // namespace ruperlb::csv
