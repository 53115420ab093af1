#include "ruperlb/csv.hpp"

#include <fstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace ruperlb::csv {
namespace {

std::ofstream open(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

// Scenario names are free text; quote them when they would break the row.
std::string field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char c : s) {
        q += c;
        if (c == '"') {
            q += '"';
        }
    }
    return q + "\"";
}

} // namespace

void write_summary_rows(std::ostream& out, std::span<const SummaryRow> rows) {
    out << kSummaryHeader << '\n';
    for (const auto& r : rows) {
        fmt::print(out, "{},{},{},{},{:.6f},{}\n", field(r.scenario), r.mode, r.rank, r.thread,
                   r.finish, r.iterations);
    }
}

void write_summary(std::ostream& out, std::span<const ScenarioResult* const> results) {
    std::vector<SummaryRow> rows;
    for (const auto* res : results) {
        for (const auto& t : res->threads) {
            rows.push_back({res->scenario, to_string(res->mode), t.rank, t.thread, t.finish, t.iterations});
        }
    }
    write_summary_rows(out, rows);
}

void write_timeline(std::ostream& out, const ScenarioResult& result) {
    out << kTimelineHeader << '\n';
    for (const auto& e : result.timeline) {
        fmt::print(out, "{:.6f},{},{},{},{:.6f}\n", e.time, e.rank, e.thread, to_string(e.kind), e.value);
    }
}

void write_measures(std::ostream& out, std::span<const std::vector<SpeedMeasure>> workers) {
    out << kMeasuresHeader << '\n';
    for (std::size_t w = 0; w < workers.size(); ++w) {
        for (const auto& m : workers[w]) {
            fmt::print(out, "{},{:.6f},{:.6f}\n", w, m.elapsed_since_start, m.speed);
        }
    }
}

std::vector<std::filesystem::path> write_run(const std::filesystem::path& dir,
                                             std::span<const ScenarioResult* const> results) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;

    auto summary_path = dir / "summary.csv";
    auto summary = open(summary_path);
    write_summary(summary, results);
    written.push_back(summary_path);

    for (const auto* res : results) {
        const auto name = results.size() == 1
                              ? std::string("timeline.csv")
                              : fmt::format("timeline_{}.csv", to_string(res->mode));
        auto path = dir / name;
        auto out = open(path);
        write_timeline(out, *res);
        written.push_back(path);

        if (res->mode != RunMode::Balanced) {
            continue;
        }
        for (std::size_t r = 0; r < res->measures.size(); ++r) {
            auto mpath = dir / fmt::format("measures_rank{}.csv", r);
            auto mout = open(mpath);
            write_measures(mout, res->measures[r]);
            written.push_back(mpath);
        }
    }
    return written;
}

} // namespace ruperlb::csv
