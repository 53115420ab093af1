#include <doctest.h>

#include <filesystem>
#include <string>

#include "ruperlb/scenario.hpp"

using namespace ruperlb;

namespace {

const char* kMinimal = R"({
  "name": "tiny",
  "process_count": 2,
  "threads_per_process": 2,
  "global_budget": 1000,
  "checkpoint_interval_s": 30,
  "profiles": [
    {"kind": "constant", "base_speed": 100},
    [{"kind": "step_schedule", "base_speed": 50, "steps": [[10, 0.5], {"from_s": 20, "multiplier": 1}]},
     {"kind": "table", "base_speed": 80, "table": [[0, 1], [100, 0.5]]}]
  ]
})";

std::string error_of(const std::string& text) {
    try {
        parse_scenario(text, "case.json");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

// Appends a key; a repeated key overrides the earlier value.
std::string with(const std::string& key, const std::string& value) {
    std::string text = kMinimal;
    const auto pos = text.rfind('}');
    return text.insert(pos, ",\"" + key + "\": " + value);
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_SUITE("scenario") {

TEST_CASE("a minimal document gets its defaults") {
    const auto cfg = parse_scenario(kMinimal);
    CHECK(cfg.name == "tiny");
    CHECK(cfg.total_threads() == 4);
    CHECK(cfg.params.checkpoint_interval == 30.0);
    CHECK(cfg.params.remaining_time_threshold == doctest::Approx(5.0));
    CHECK(cfg.params.max_speed_deviation == doctest::Approx(0.2));
    CHECK(cfg.initial_report_interval == doctest::Approx(5.0));
    CHECK(cfg.mode == RunMode::Balanced);
    CHECK_FALSE(cfg.jitter.enabled());
    REQUIRE(cfg.profiles.size() == 2);
    CHECK(cfg.profiles[0][1] == SpeedProfile::constant(100.0));
    CHECK(cfg.profiles[1][0].kind == SpeedProfile::Kind::StepSchedule);
    CHECK(cfg.profiles[1][0].speed(15.0) == doctest::Approx(25.0));
    CHECK(cfg.profiles[1][1].speed(50.0) == doctest::Approx(60.0));
}

TEST_CASE("the normalized dump parses back to the same config") {
    const auto cfg = parse_scenario(with("jitter", R"({"amplitude": 0.1, "window_s": 4})"));
    const auto again = parse_scenario(dump_scenario(cfg));
    CHECK(again == cfg);
}

TEST_CASE("bundled scenarios are valid") {
    int seen = 0;
    for (const auto& entry : std::filesystem::directory_iterator(RUPERLB_SCENARIO_DIR)) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_scenario(entry.path()));
        ++seen;
    }
    CHECK(seen >= 5);
}

TEST_CASE("range errors name the key") {
    CHECK(contains(error_of(with("max_speed_deviation", "1.5")),
                   "max_speed_deviation must be in (0,1)"));
    const auto zero = error_of(with("threads_per_process", "0"));
    CHECK(contains(zero, "threads_per_process"));
    CHECK(contains(zero, "case.json"));
    CHECK(contains(error_of(with("global_budget", "3")), "global_budget"));
    CHECK(contains(error_of(with("checkpoint_interval_s", "-1")), "checkpoint_interval_s"));
    CHECK(contains(error_of(with("mode", "\"sideways\"")), "mode"));
    CHECK(contains(error_of(with("jitter", R"({"amplitude": 2})")), "jitter.amplitude"));
    CHECK(contains(error_of(with("process_count", "3")), "profiles"));
}

TEST_CASE("type and key errors name the key") {
    CHECK(contains(error_of(with("colour", "1")), "key 'colour': unknown key"));
    CHECK(contains(error_of(with("global_budget", "\"lots\"")), "global_budget"));
    CHECK(contains(error_of(with("global_budget", "10.5")), "expected an integer"));
    CHECK(contains(error_of(with("checks", R"([{"metric": "speed", "mode": "balanced", "op": "<", "bound": 1}])")),
                   "unknown metric"));
    CHECK(contains(error_of(with("checks", R"([{"metric": "makespan_ratio", "mode": "balanced", "op": "<", "bound": 1}])")),
                   "comparison"));
    CHECK(contains(error_of(with("checks", R"([{"metric": "makespan", "mode": "balanced", "op": "~", "bound": 1}])")),
                   "unknown operator"));
    CHECK(contains(error_of(R"({"process_count": 1, "threads_per_process": 1, "profiles": []})"),
                   "global_budget"));
    std::string bad_kind = kMinimal;
    bad_kind.replace(bad_kind.find("\"constant\""), 10, "\"wobbly\"");
    CHECK(contains(error_of(bad_kind), "profiles[0].kind"));
}

TEST_CASE("syntax errors report line and column") {
    const auto msg = error_of("{\n  \"name\": \"x\",\n  \"process_count\": ,\n}");
    CHECK(contains(msg, "case.json:3:"));
    CHECK(contains(msg, "invalid JSON"));
}

TEST_CASE("missing files raise a config error with the path") {
    try {
        load_scenario("/nonexistent/scenario.json");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(contains(e.what(), "/nonexistent/scenario.json"));
    }
}

TEST_CASE("run modes") {
    CHECK(parse_run_mode("balanced") == RunMode::Balanced);
    CHECK(parse_run_mode("static") == RunMode::Static);
    CHECK(parse_run_mode("both") == RunMode::Both);
    CHECK_THROWS_AS(parse_run_mode("fast"), InvalidArgument);
    CHECK(std::string(to_string(RunMode::Static)) == "static");
}

}
