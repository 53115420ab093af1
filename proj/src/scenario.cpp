#include "ruperlb/scenario.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ruperlb {
namespace {

using nlohmann::json;

constexpr std::array kMetrics = {
    "makespan",      "rank_spread",      "max_thread_spread",       "relative_rank_spread",
    "total_executed", "overshoot",       "overshoot_bound",         "conservation_violations",
    "ideal_makespan", "makespan_ratio",
};
constexpr std::array kOps = {"<", "<=", ">", ">=", "=="};

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ConfigError(fmt::format("key '{}': {}", key, what));
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : obj.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* x) { return k == x; }) == keys.end()) {
            fail(where.empty() ? k : where + "." + k, "unknown key");
        }
    }
}

const json& require(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) {
        fail(where.empty() ? key : where + "." + key, "missing required key");
    }
    return obj.at(key);
}

double number(const json& v, const std::string& key) {
    if (!v.is_number()) {
        fail(key, "expected a number");
    }
    return v.get<double>();
}

std::int64_t integer(const json& v, const std::string& key) {
    if (v.is_number_integer()) {
        return v.get<std::int64_t>();
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == std::floor(d) && std::abs(d) < 9e15) {
            return static_cast<std::int64_t>(d);
        }
    }
    fail(key, "expected an integer");
}

std::size_t count(const json& v, const std::string& key) {
    const auto n = integer(v, key);
    if (n < 1) {
        fail(key, "must be >= 1");
    }
    return static_cast<std::size_t>(n);
}

std::string text(const json& v, const std::string& key) {
    if (!v.is_string()) {
        fail(key, "expected a string");
    }
    return v.get<std::string>();
}

std::vector<std::pair<Seconds, double>> points(const json& v, const std::string& key,
                                               const char* time_key) {
    if (!v.is_array()) {
        fail(key, "expected an array of points");
    }
    std::vector<std::pair<Seconds, double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string k = fmt::format("{}[{}]", key, i);
        const json& p = v[i];
        if (p.is_array() && p.size() == 2) {
            out.emplace_back(number(p[0], k + "[0]"), number(p[1], k + "[1]"));
        } else if (p.is_object()) {
            reject_unknown(p, k, {time_key, "multiplier"});
            out.emplace_back(number(require(p, k, time_key), k + "." + time_key),
                             number(require(p, k, "multiplier"), k + ".multiplier"));
        } else {
            fail(k, fmt::format("expected [{}, multiplier]", time_key));
        }
    }
    return out;
}

SpeedProfile parse_profile(const json& v, const std::string& key) {
    if (!v.is_object()) {
        fail(key, "expected a profile object");
    }
    const std::string kind = text(require(v, key, "kind"), key + ".kind");
    const double base = number(require(v, key, "base_speed"), key + ".base_speed");
    SpeedProfile p;
    if (kind == "constant") {
        reject_unknown(v, key, {"kind", "base_speed"});
        p = SpeedProfile::constant(base);
    } else if (kind == "step_schedule") {
        reject_unknown(v, key, {"kind", "base_speed", "steps"});
        p = SpeedProfile::step_schedule(
            base, points(require(v, key, "steps"), key + ".steps", "from_s"));
    } else if (kind == "sinusoidal") {
        reject_unknown(v, key, {"kind", "base_speed", "amplitude", "period_s"});
        p = SpeedProfile::sinusoidal(base, number(require(v, key, "amplitude"), key + ".amplitude"),
                                     number(require(v, key, "period_s"), key + ".period_s"));
    } else if (kind == "table") {
        reject_unknown(v, key, {"kind", "base_speed", "table"});
        p = SpeedProfile::table_of(base,
                                   points(require(v, key, "table"), key + ".table", "time_s"));
    } else {
        fail(key + ".kind", "unknown profile kind '" + kind + "'");
    }
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        fail(key, e.what());
    }
    return p;
}

json profile_to_json(const SpeedProfile& p) {
    json j{{"kind", to_string(p.kind)}, {"base_speed", p.base_speed}};
    switch (p.kind) {
    case SpeedProfile::Kind::Constant:
        break;
    case SpeedProfile::Kind::StepSchedule:
        j["steps"] = p.steps;
        break;
    case SpeedProfile::Kind::Sinusoidal:
        j["amplitude"] = p.amplitude;
        j["period_s"] = p.period;
        break;
    case SpeedProfile::Kind::Table:
        j["table"] = p.table;
        break;
    }
    return j;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view doc, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < std::min(byte, doc.size()); ++i) {
        if (doc[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

ScenarioConfig from_json(const json& root) {
    if (!root.is_object()) {
        throw ConfigError("scenario must be a JSON object");
    }
    reject_unknown(root, "",
                   {"name", "process_count", "threads_per_process", "global_budget",
                    "checkpoint_interval_s", "remaining_time_threshold_s", "max_speed_deviation",
                    "initial_report_interval_s", "rng_seed", "jitter", "mode", "profiles", "checks",
                    "time_cap_factor"});

    ScenarioConfig cfg;
    if (root.contains("name")) {
        cfg.name = text(root["name"], "name");
    }
    cfg.process_count = count(require(root, "", "process_count"), "process_count");
    cfg.threads_per_process = count(require(root, "", "threads_per_process"), "threads_per_process");
    cfg.global_budget = integer(require(root, "", "global_budget"), "global_budget");

    const Seconds dtpc = root.contains("checkpoint_interval_s")
                             ? number(root["checkpoint_interval_s"], "checkpoint_interval_s")
                             : BalanceParams{}.checkpoint_interval;
    cfg.params = BalanceParams::with_defaults(dtpc);
    if (root.contains("remaining_time_threshold_s")) {
        cfg.params.remaining_time_threshold =
            number(root["remaining_time_threshold_s"], "remaining_time_threshold_s");
    }
    if (root.contains("max_speed_deviation")) {
        cfg.params.max_speed_deviation = number(root["max_speed_deviation"], "max_speed_deviation");
    }
    cfg.initial_report_interval = root.contains("initial_report_interval_s")
                                      ? number(root["initial_report_interval_s"],
                                               "initial_report_interval_s")
                                      : dtpc / 6.0;
    if (root.contains("rng_seed")) {
        const auto seed = integer(root["rng_seed"], "rng_seed");
        if (seed < 0) {
            fail("rng_seed", "must be >= 0");
        }
        cfg.rng_seed = static_cast<std::uint64_t>(seed);
    }
    if (root.contains("jitter")) {
        const json& j = root["jitter"];
        if (!j.is_object()) {
            fail("jitter", "expected an object");
        }
        reject_unknown(j, "jitter", {"amplitude", "window_s"});
        if (j.contains("amplitude")) {
            cfg.jitter.amplitude = number(j["amplitude"], "jitter.amplitude");
        }
        if (j.contains("window_s")) {
            cfg.jitter.window = number(j["window_s"], "jitter.window_s");
        }
    }
    if (root.contains("mode")) {
        try {
            cfg.mode = parse_run_mode(text(root["mode"], "mode"));
        } catch (const InvalidArgument& e) {
            fail("mode", e.what());
        }
    }
    if (root.contains("time_cap_factor")) {
        cfg.time_cap_factor = number(root["time_cap_factor"], "time_cap_factor");
    }

    const json& profiles = require(root, "", "profiles");
    if (!profiles.is_array() || profiles.size() != cfg.process_count) {
        fail("profiles", fmt::format("expected an array with one entry per process ({})",
                                     cfg.process_count));
    }
    for (std::size_t r = 0; r < profiles.size(); ++r) {
        const std::string key = fmt::format("profiles[{}]", r);
        const json& entry = profiles[r];
        std::vector<SpeedProfile> row;
        if (entry.is_array()) {
            if (entry.size() != cfg.threads_per_process) {
                fail(key, fmt::format("expected one profile per thread ({})",
                                      cfg.threads_per_process));
            }
            for (std::size_t t = 0; t < entry.size(); ++t) {
                row.push_back(parse_profile(entry[t], fmt::format("{}[{}]", key, t)));
            }
        } else {
            row.assign(cfg.threads_per_process, parse_profile(entry, key));
        }
        cfg.profiles.push_back(std::move(row));
    }

    if (root.contains("checks")) {
        const json& checks = root["checks"];
        if (!checks.is_array()) {
            fail("checks", "expected an array");
        }
        for (std::size_t i = 0; i < checks.size(); ++i) {
            const std::string key = fmt::format("checks[{}]", i);
            const json& c = checks[i];
            if (!c.is_object()) {
                fail(key, "expected an object");
            }
            reject_unknown(c, key, {"metric", "mode", "op", "bound"});
            CheckSpec spec;
            spec.metric = text(require(c, key, "metric"), key + ".metric");
            spec.mode = c.contains("mode") ? text(c["mode"], key + ".mode") : "balanced";
            spec.op = text(require(c, key, "op"), key + ".op");
            spec.bound = number(require(c, key, "bound"), key + ".bound");
            cfg.checks.push_back(std::move(spec));
        }
    }
    return cfg;
}

} // namespace

const char* to_string(RunMode mode) {
    switch (mode) {
    case RunMode::Balanced: return "balanced";
    case RunMode::Static: return "static";
    case RunMode::Both: return "both";
    }
    return "unknown";
}

RunMode parse_run_mode(std::string_view text) {
    if (text == "balanced") {
        return RunMode::Balanced;
    }
    if (text == "static") {
        return RunMode::Static;
    }
    if (text == "both") {
        return RunMode::Both;
    }
    throw InvalidArgument(fmt::format("mode must be balanced, static or both, got '{}'", text));
}

void ScenarioConfig::validate() const {
    if (process_count < 1) {
        fail("process_count", "must be >= 1");
    }
    if (threads_per_process < 1) {
        fail("threads_per_process", "must be >= 1");
    }
    if (global_budget < static_cast<Iterations>(total_threads())) {
        fail("global_budget", fmt::format("must be at least one iteration per thread ({})",
                                          total_threads()));
    }
    if (!(params.checkpoint_interval > 0.0)) {
        fail("checkpoint_interval_s", "must be > 0");
    }
    if (!(params.remaining_time_threshold > 0.0)) {
        fail("remaining_time_threshold_s", "must be > 0");
    }
    if (!(params.max_speed_deviation > 0.0 && params.max_speed_deviation < 1.0)) {
        fail("max_speed_deviation", "max_speed_deviation must be in (0,1)");
    }
    if (!(initial_report_interval > 0.0)) {
        fail("initial_report_interval_s", "must be > 0");
    }
    if (!(jitter.amplitude >= 0.0 && jitter.amplitude < 1.0)) {
        fail("jitter.amplitude", "must be in [0,1)");
    }
    if (!(jitter.window > 0.0)) {
        fail("jitter.window_s", "must be > 0");
    }
    if (!(time_cap_factor > 1.0)) {
        fail("time_cap_factor", "must be > 1");
    }
    if (profiles.size() != process_count) {
        fail("profiles", "expected one entry per process");
    }
    for (std::size_t r = 0; r < profiles.size(); ++r) {
        if (profiles[r].size() != threads_per_process) {
            fail(fmt::format("profiles[{}]", r), "expected one profile per thread");
        }
        for (std::size_t t = 0; t < profiles[r].size(); ++t) {
            try {
                profiles[r][t].validate();
            } catch (const InvalidArgument& e) {
                fail(fmt::format("profiles[{}][{}]", r, t), e.what());
            }
        }
    }
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto& c = checks[i];
        const std::string key = fmt::format("checks[{}]", i);
        if (std::find(kMetrics.begin(), kMetrics.end(), c.metric) == kMetrics.end()) {
            fail(key + ".metric", "unknown metric '" + c.metric + "'");
        }
        if (std::find(kOps.begin(), kOps.end(), c.op) == kOps.end()) {
            fail(key + ".op", "unknown operator '" + c.op + "'");
        }
        const bool comparison = c.metric == "makespan_ratio";
        if (comparison ? c.mode != "comparison" : (c.mode != "balanced" && c.mode != "static")) {
            fail(key + ".mode", comparison ? "makespan_ratio needs mode 'comparison'"
                                           : "mode must be balanced or static");
        }
    }
}

ScenarioConfig parse_scenario(std::string_view text, const std::string& source) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        std::string what = e.what();
        if (const auto pos = what.find("; last read"); pos != std::string::npos) {
            what = what.substr(pos + 2);
        }
        throw ConfigError(fmt::format("{}:{}:{}: invalid JSON ({})", source, line, col, what));
    }
    try {
        ScenarioConfig cfg = from_json(root);
        cfg.validate();
        return cfg;
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", source, e.what()));
    }
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("{}: cannot open scenario file", path.string()));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path.string());
}

std::string dump_scenario(const ScenarioConfig& cfg) {
    json profiles = json::array();
    for (const auto& row : cfg.profiles) {
        json r = json::array();
        for (const auto& p : row) {
            r.push_back(profile_to_json(p));
        }
        profiles.push_back(std::move(r));
    }
    json checks = json::array();
    for (const auto& c : cfg.checks) {
        checks.push_back({{"metric", c.metric}, {"mode", c.mode}, {"op", c.op}, {"bound", c.bound}});
    }
    const json root = {
        {"name", cfg.name},
        {"process_count", cfg.process_count},
        {"threads_per_process", cfg.threads_per_process},
        {"global_budget", cfg.global_budget},
        {"checkpoint_interval_s", cfg.params.checkpoint_interval},
        {"remaining_time_threshold_s", cfg.params.remaining_time_threshold},
        {"max_speed_deviation", cfg.params.max_speed_deviation},
        {"initial_report_interval_s", cfg.initial_report_interval},
        {"rng_seed", cfg.rng_seed},
        {"jitter", {{"amplitude", cfg.jitter.amplitude}, {"window_s", cfg.jitter.window}}},
        {"mode", to_string(cfg.mode)},
        {"time_cap_factor", cfg.time_cap_factor},
        {"profiles", std::move(profiles)},
        {"checks", std::move(checks)},
    };
    return root.dump(2);
}

std::vector<std::vector<SpeedProfile>> uniform_profiles(std::size_t process_count,
                                                        std::size_t threads_per_process,
                                                        const SpeedProfile& profile) {
    return {process_count, std::vector<SpeedProfile>(threads_per_process, profile)};
}

} // namespace ruperlb
