// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "oracle.hpp"
#include "ruperlb/coordinator.hpp"
#include "ruperlb/scenario.hpp"
#include "ruperlb/simulator.hpp"
#include "ruperlb/task.hpp"

using namespace ruperlb;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

ScenarioConfig scenario(const std::string& name) {
    return load_scenario(fs::path(RUPERLB_SCENARIO_DIR) / name);
}

std::vector<ScenarioConfig> all_scenarios() {
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(RUPERLB_SCENARIO_DIR)) {
        if (e.path().extension() == ".json") {
            paths.push_back(e.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    std::vector<ScenarioConfig> out;
    for (const auto& p : paths) {
        out.push_back(load_scenario(p));
    }
    return out;
}

Verdict rank_spread() {
    const auto cfg = scenario("overloaded_neighbour.json");
    const auto r = run_scenario(cfg, RunMode::Balanced);
    const double bound = cfg.params.checkpoint_interval;
    return {r.rank_spread() < bound,
            fmt::format("rank spread {:.3f} s < {:.0f} s (makespan {:.1f} s)", r.rank_spread(), bound,
                        r.makespan)};
}

Verdict thread_spread() {
    const auto cfg = scenario("overloaded_neighbour.json");
    const auto r = run_scenario(cfg, RunMode::Balanced);
    const double bound = cfg.params.checkpoint_interval;
    std::string per_rank;
    bool ok = true;
    for (Rank k = 0; k < cfg.process_count; ++k) {
        per_rank += fmt::format("{}rank {}: {:.3f} s", k == 0 ? "" : ", ", k, r.thread_spread(k));
        ok = ok && r.thread_spread(k) < bound;
    }
    return {ok, per_rank + fmt::format(" < {:.0f} s", bound)};
}

Verdict relative_spread() {
    const auto base = scenario("overloaded_neighbour.json");
    const auto longer = scenario("overloaded_neighbour_long.json");
    const auto a = run_scenario(base, RunMode::Balanced);
    const auto b = run_scenario(longer, RunMode::Balanced);
    const bool same_shape = longer.global_budget == 4 * base.global_budget &&
                            longer.params == base.params && longer.profiles == base.profiles;
    return {same_shape && b.relative_rank_spread() < a.relative_rank_spread(),
            fmt::format("relative spread {:.5f} (x4 budget) < {:.5f}", b.relative_rank_spread(),
                        a.relative_rank_spread())};
}

Verdict hidden_imbalance() {
    const auto cfg = scenario("hidden_imbalance.json");
    const auto c = compare_modes(cfg);
    const double ideal = c.balanced.ideal_makespan;
    const double st = c.static_split.makespan;
    const double bal = c.balanced.makespan;
    const bool hidden = st >= 1.15 * ideal;
    const bool faster = bal <= 0.95 * st;
    const bool near_ideal = bal <= ideal + cfg.params.checkpoint_interval;
    return {hidden && faster && near_ideal,
            fmt::format("ideal {:.1f} s, static {:.1f} s ({:.3f}x ideal), balanced {:.1f} s "
                        "(ratio {:.3f})",
                        ideal, st, st / ideal, bal, c.makespan_ratio)};
}

Verdict closed_form() {
    const auto cfg = scenario("two_rank_hetero.json");
    const auto c = compare_modes(cfg);
    const double st = c.static_split.makespan;
    const double bal = c.balanced.makespan;
    const bool ok = std::abs(st - 300.0) < 1e-9 && bal >= 200.0 && bal <= 230.0;
    return {ok, fmt::format("static {:.6f} s, balanced {:.3f} s", st, bal)};
}

Verdict conservation() {
    std::size_t checks = 0;
    std::size_t violations = 0;
    std::string failures;
    for (const auto& cfg : all_scenarios()) {
        std::vector<RunMode> modes{RunMode::Balanced};
        if (cfg.mode != RunMode::Balanced) {
            modes.push_back(RunMode::Static);
        }
        for (const auto mode : modes) {
            const auto r = run_scenario(cfg, mode);
            checks += r.conservation.checks;
            violations += r.conservation.violations;
            const bool executed = mode == RunMode::Static ? r.total_executed == r.budget
                                                          : r.total_executed >= r.budget;
            const bool overshoot = static_cast<double>(r.overshoot()) <= r.overshoot_bound;
            if (r.conservation.violations > 0 || !executed || !overshoot) {
                failures += fmt::format(" {}/{}", cfg.name, to_string(mode));
            }
        }
    }
    const bool ok = failures.empty() && violations == 0 && checks > 0;
    return {ok, fmt::format("{} assignment checks, {} violations{}", checks, violations,
                            failures.empty() ? "" : "; failing:" + failures)};
}

// Task-level instance: reports at random times, an explicit checkpoint after
// each one, every result compared with the reference recomputed from traces.
bool task_instance(std::mt19937_64& rng) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    const Iterations budget = std::uniform_int_distribution<Iterations>(n, 50000)(rng);
    const double t_min = std::uniform_real_distribution<double>(0.5, 20.0)(rng);
    ManualClock clock;
    Task task(BalanceParams{1e9, t_min, 0.2}, clock);
    task.start(n, budget, 0.0);

    std::vector<oracle::ThreadTrace> traces(n);
    std::vector<std::int64_t> assigned(n);
    for (std::size_t i = 0; i < n; ++i) {
        assigned[i] = budget / static_cast<Iterations>(n) +
                      (static_cast<Iterations>(i) < budget % static_cast<Iterations>(n) ? 1 : 0);
        if (task.assigned(i) != assigned[i]) {
            return false;
        }
    }
    double now = 0.0;
    for (int step = 0; step < 12; ++step) {
        now += std::uniform_real_distribution<double>(0.1, 15.0)(rng);
        const std::size_t i = rng() % n;
        const auto done = traces[i].done() + std::uniform_int_distribution<Iterations>(0, 3000)(rng);
        traces[i].reports.push_back({now, done});
        task.report(i, done, now);

        std::vector<oracle::View> views;
        for (std::size_t k = 0; k < n; ++k) {
            views.push_back(oracle::view_of(traces[k], assigned[k]));
        }
        const auto expected = oracle::checkpoint(views, budget, now, t_min);
        const auto outcome = task.checkpoint(now);
        if (static_cast<int>(outcome) != static_cast<int>(expected.outcome)) {
            return false;
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (task.assigned(k) != expected.assigned[k]) {
                return false;
            }
        }
        assigned = expected.assigned;
    }
    return true;
}

// Coordinator-level instance: predicted totals (which may regress) arrive
// from random ranks; every reassignment is compared with the reference.
bool coordinator_instance(std::mt19937_64& rng) {
    const std::size_t procs = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    const Iterations budget = std::uniform_int_distribution<Iterations>(procs, 200000)(rng);
    const double t_min = std::uniform_real_distribution<double>(0.5, 20.0)(rng);
    Coordinator coord(procs, budget, BalanceParams{30.0, t_min, 0.2});
    std::vector<oracle::GuessTrace> traces(procs);
    std::vector<std::int64_t> assigned(procs, budget / static_cast<Iterations>(procs));
    for (Rank r = 0; r < procs; ++r) {
        if (coord.start(r, 0.0).new_assignment != assigned[r]) {
            return false;
        }
    }
    double now = 0.0;
    for (int step = 0; step < 12 && !coord.finished(); ++step) {
        now += std::uniform_real_distribution<double>(0.1, 15.0)(rng);
        const Rank r = static_cast<Rank>(rng() % procs);
        std::int64_t last = 0;
        if (!traces[r].reports.empty()) {
            last = traces[r].reports.back().count;
        }
        const auto predicted =
            std::max<std::int64_t>(0, last + std::uniform_int_distribution<Iterations>(-500, 8000)(rng));
        traces[r].reports.push_back({now, predicted});

        std::vector<oracle::View> views;
        for (Rank k = 0; k < procs; ++k) {
            views.push_back(oracle::view_of(traces[k], assigned[k]));
        }
        const auto expected =
            oracle::checkpoint(views, budget, now, t_min, oracle::unbalanced(views, budget));
        const auto out = coord.receive_report({Instruction::Report, r, now, predicted});
        if (!out.rebalance ||
            static_cast<int>(out.rebalance->outcome) != static_cast<int>(expected.outcome)) {
            return false;
        }
        for (Rank k = 0; k < procs; ++k) {
            if (coord.guess_worker(k).assigned() != expected.assigned[k]) {
                return false;
            }
        }
        if (out.response.new_assignment != expected.assigned[r]) {
            return false;
        }
        assigned = expected.assigned;
    }
    return true;
}

Verdict oracle_equivalence() {
    std::mt19937_64 rng(20240611);
    int task_fail = 0;
    int coord_fail = 0;
    constexpr int kInstances = 1000;
    for (int i = 0; i < kInstances; ++i) {
        task_fail += task_instance(rng) ? 0 : 1;
        coord_fail += coordinator_instance(rng) ? 0 : 1;
    }
    return {task_fail == 0 && coord_fail == 0,
            fmt::format("{} task instances ({} mismatches), {} coordinator instances ({} "
                        "mismatches)",
                        kInstances, task_fail, kInstances, coord_fail)};
}

Verdict liveness() {
    std::size_t runs = 0;
    std::string failures;
    for (const auto& cfg : all_scenarios()) {
        for (const auto mode : {RunMode::Balanced, RunMode::Static}) {
            try {
                run_scenario(cfg, mode);
                ++runs;
            } catch (const NonTerminating& e) {
                failures += fmt::format(" {}/{}", cfg.name, to_string(mode));
            }
        }
    }
    const auto c = compare_modes(scenario("homogeneous.json"));
    const bool no_harm = c.makespan_ratio <= 1.02;
    return {failures.empty() && no_harm,
            fmt::format("{} runs terminated{}; homogeneous ratio {:.4f} <= 1.02", runs,
                        failures.empty() ? "" : ", non-terminating:" + failures, c.makespan_ratio)};
}

// -- real-thread demo ------------------------------------------------------

struct Child {
    FILE* pipe = nullptr;
    std::string output;
    int status = -1;
};

Child spawn(const std::string& args) {
    Child c;
    const std::string cmd = fmt::format("'{}' {} 2>&1", RUPERLB_TOOL, args);
    c.pipe = ::popen(cmd.c_str(), "r");
    return c;
}

void collect(Child& c) {
    if (c.pipe == nullptr) {
        return;
    }
    char buffer[4096];
    while (std::fgets(buffer, sizeof buffer, c.pipe) != nullptr) {
        c.output += buffer;
    }
    const int raw = ::pclose(c.pipe);
    c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    c.pipe = nullptr;
}

std::map<std::string, std::string> key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto end = std::min(text.find('\n', start), text.size());
        const std::string line = text.substr(start, end - start);
        const auto eq = line.find('=');
        if (eq != std::string::npos && line.find(' ') == std::string::npos) {
            out[line.substr(0, eq)] = line.substr(eq + 1);
        }
        start = end + 1;
    }
    return out;
}

int free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

Verdict demo() {
    Child single = spawn("demo --threads 4 --budget 4000000 --seed 1");
    collect(single);
    auto kv = key_values(single.output);
    const double pi_error = kv.count("pi_error") ? std::stod(kv["pi_error"]) : 1.0;
    const bool single_ok = single.status == 0 && pi_error < 0.01 &&
                           kv["local_conservation"] == "pass" && kv["global_conservation"] == "pass";

    const std::string address = fmt::format("127.0.0.1:{}", free_port());
    Child rank0 = spawn(fmt::format("demo --threads 4 --budget 4000000 --seed 1 --procs 2 --listen {}",
                                    address));
    Child rank1 = spawn(fmt::format("demo --threads 4 --budget 4000000 --seed 1 --procs 2 --rank 1 "
                                    "--connect {}",
                                    address));
    collect(rank0);
    collect(rank1);
    auto kv0 = key_values(rank0.output);
    auto kv1 = key_values(rank1.output);
    long long executed = 0;
    for (auto* m : {&kv0, &kv1}) {
        executed += m->count("executed") ? std::stoll((*m)["executed"]) : 0;
    }
    const bool tcp_ok = rank0.status == 0 && rank1.status == 0 &&
                        kv0["global_conservation"] == "pass" &&
                        kv0["local_conservation"] == "pass" &&
                        kv1["local_conservation"] == "pass" && executed >= 4000000;
    if (!single_ok) {
        std::fputs(single.output.c_str(), stderr);
    }
    if (!tcp_ok) {
        std::fputs(rank0.output.c_str(), stderr);
        std::fputs(rank1.output.c_str(), stderr);
    }
    return {single_ok && tcp_ok,
            fmt::format("pi error {:.5f}, local conservation {}; two processes executed {} "
                        "(exit {} / {}), global conservation {}",
                        pi_error, kv["local_conservation"], executed, rank0.status, rank1.status,
                        kv0["global_conservation"])};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"rank spread below the checkpoint interval", rank_spread},
        {"thread spread below the checkpoint interval", thread_spread},
        {"relative rank spread shrinks with a 4x budget", relative_spread},
        {"speedup on hidden thread imbalance", hidden_imbalance},
        {"closed-form heterogeneous 2x2", closed_form},
        {"assignment conservation", conservation},
        {"reference equivalence", oracle_equivalence},
        {"liveness and homogeneous no-harm", liveness},
        {"real-thread demo", demo},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        fmt::print("criterion {}: {} {} ({})\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                   v.detail);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
