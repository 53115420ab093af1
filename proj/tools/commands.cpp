#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ruperlb/csv.hpp"
#include "ruperlb/log.hpp"

namespace ruperlb::cli {
namespace {

bool compare(double observed, const std::string& op, double bound) {
    if (op == "<") return observed < bound;
    if (op == "<=") return observed <= bound;
    if (op == ">") return observed > bound;
    if (op == ">=") return observed >= bound;
    if (op == "==") return observed == bound;
    throw InvalidArgument("unknown operator " + op);
}

void print_result(std::ostream& out, const ScenarioResult& r) {
    fmt::print(out, "[{}] makespan {:.3f} s (ideal {:.3f} s), rank spread {:.3f} s, "
                    "max thread spread {:.3f} s\n",
               to_string(r.mode), r.makespan, r.ideal_makespan, r.rank_spread(),
               r.max_thread_spread());
    for (Rank rank = 0; rank < r.rank_finish.size(); ++rank) {
        fmt::print(out, "[{}]   rank {} finishes at {:.3f} s (thread spread {:.3f} s)\n",
                   to_string(r.mode), rank, r.rank_finish[rank], r.thread_spread(rank));
    }
    fmt::print(out, "[{}] executed {} of {} iterations (overshoot {}, bound {:.1f}); "
                    "conservation {}/{} checks ok\n",
               to_string(r.mode), r.total_executed, r.budget, r.overshoot(), r.overshoot_bound,
               r.conservation.checks - r.conservation.violations, r.conservation.checks);
    for (const auto& v : r.conservation.first_violations) {
        fmt::print(out, "[{}]   violation: {}\n", to_string(r.mode), v);
    }
}

} // namespace

bool RunReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.pass; });
}

double metric_value(const std::string& metric, const ScenarioResult& r) {
    if (metric == "makespan") return r.makespan;
    if (metric == "rank_spread") return r.rank_spread();
    if (metric == "max_thread_spread") return r.max_thread_spread();
    if (metric == "relative_rank_spread") return r.relative_rank_spread();
    if (metric == "total_executed") return static_cast<double>(r.total_executed);
    if (metric == "overshoot") return static_cast<double>(r.overshoot());
    if (metric == "overshoot_bound") return r.overshoot_bound;
    if (metric == "conservation_violations") return static_cast<double>(r.conservation.violations);
    if (metric == "ideal_makespan") return r.ideal_makespan;
    throw InvalidArgument("unknown metric " + metric);
}

std::vector<CheckOutcome> evaluate_checks(const ScenarioConfig& cfg, const ScenarioResult* balanced,
                                          const ScenarioResult* static_split,
                                          const Comparison* comparison) {
    std::vector<CheckOutcome> out;
    for (const auto& spec : cfg.checks) {
        CheckOutcome c{spec, std::nullopt, false};
        if (spec.mode == "comparison") {
            if (comparison) {
                c.observed = comparison->makespan_ratio;
            }
        } else {
            const ScenarioResult* r = spec.mode == "static" ? static_split : balanced;
            if (r) {
                c.observed = metric_value(spec.metric, *r);
            }
        }
        c.pass = c.observed && compare(*c.observed, spec.op, spec.bound);
        out.push_back(std::move(c));
    }
    return out;
}

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    ScenarioConfig cfg;
    try {
        cfg = load_scenario(opt.scenario);
        if (opt.seed) {
            cfg.rng_seed = *opt.seed;
        }
        if (opt.mode) {
            cfg.mode = *opt.mode;
        }
    } catch (const ConfigError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kConfigError;
    }

    RunReport report;
    report.scenario = cfg.name;
    try {
        std::optional<Comparison> comparison;
        std::optional<ScenarioResult> single;
        std::vector<const ScenarioResult*> results;
        if (cfg.mode == RunMode::Both) {
            comparison = compare_modes(cfg);
            results = {&comparison->balanced, &comparison->static_split};
        } else {
            single = run_scenario(cfg, cfg.mode);
            results = {&*single};
        }

        const ScenarioResult* balanced = nullptr;
        const ScenarioResult* static_split = nullptr;
        for (const auto* r : results) {
            (r->mode == RunMode::Balanced ? balanced : static_split) = r;
        }
        report.outputs = csv::write_run(opt.out, results);
        report.checks = evaluate_checks(cfg, balanced, static_split,
                                        comparison ? &*comparison : nullptr);

        fmt::print(out, "scenario {} ({} x {} threads, budget {})\n", cfg.name, cfg.process_count,
                   cfg.threads_per_process, cfg.global_budget);
        for (const auto* r : results) {
            print_result(out, *r);
        }
        if (comparison) {
            fmt::print(out, "makespan ratio balanced/static {:.4f}\n", comparison->makespan_ratio);
        }
        for (const auto& c : report.checks) {
            const auto& s = c.spec;
            if (c.observed) {
                fmt::print(out, "check {} {}.{} {} {} (observed {:.6g})\n", c.pass ? "PASS" : "FAIL",
                           s.mode, s.metric, s.op, s.bound, *c.observed);
            } else {
                fmt::print(out, "check FAIL {}.{} {} {} (mode not run)\n", s.mode, s.metric, s.op,
                           s.bound);
            }
        }
        for (const auto& p : report.outputs) {
            fmt::print(out, "wrote {}\n", p.string());
        }
    } catch (const NonTerminating& e) {
        fmt::print(err, "aborted: {}\n", e.what());
        return kRuntimeAbort;
    } catch (const std::exception& e) {
        fmt::print(err, "aborted: {}\n", e.what());
        return kRuntimeAbort;
    }
    return report.passed() ? kPass : kCheckFailed;
}

int cmd_validate(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err) {
    try {
        const ScenarioConfig cfg = load_scenario(scenario);
        out << dump_scenario(cfg) << '\n';
        return kPass;
    } catch (const ConfigError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kConfigError;
    }
}

int cmd_demo(const DemoOptions& opt, const std::optional<std::filesystem::path>& out_dir,
             std::ostream& out, std::ostream& err) {
    DemoResult r;
    try {
        r = run_demo(opt);
    } catch (const InvalidArgument& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        fmt::print(err, "aborted: {}\n", e.what());
        return kRuntimeAbort;
    }

    for (const auto& t : r.threads) {
        fmt::print(out, "rank {} thread {}: {} iterations, finished at {:.3f} s\n", r.rank, t.thread,
                   t.iterations, t.finish);
    }
    fmt::print(out, "rank={}\n", r.rank);
    fmt::print(out, "executed={}\n", r.executed);
    fmt::print(out, "local_budget={}\n", r.local_budget);
    fmt::print(out, "hits={}\n", r.hits);
    fmt::print(out, "pi={:.6f}\n", r.pi);
    fmt::print(out, "pi_error={:.6f}\n", std::abs(r.pi - std::numbers::pi));
    fmt::print(out, "thread_spread_s={:.6f}\n", r.spread);
    fmt::print(out, "local_conservation={}\n", r.local_ok() ? "pass" : "fail");
    bool ok = r.local_ok();
    if (!r.process_assignments.empty()) {
        const bool global = r.global_ok(opt.budget);
        fmt::print(out, "process_assignments={}\n", fmt::join(r.process_assignments, ","));
        fmt::print(out, "global_conservation={}\n", global ? "pass" : "fail");
        ok = ok && global;
    } else if (opt.procs == 1) {
        const bool global = r.executed >= opt.budget;
        fmt::print(out, "global_conservation={}\n", global ? "pass" : "fail");
        ok = ok && global;
    }

    if (out_dir) {
        try {
            std::filesystem::create_directories(*out_dir);
            std::vector<csv::SummaryRow> rows;
            for (const auto& t : r.threads) {
                rows.push_back({"demo", "balanced", r.rank, t.thread, t.finish, t.iterations});
            }
            const auto path = *out_dir / "demo_summary.csv";
            std::ofstream file(path);
            if (!file) {
                throw Error("cannot write " + path.string());
            }
            csv::write_summary_rows(file, rows);
            fmt::print(out, "wrote {}\n", path.string());
        } catch (const std::exception& e) {
            fmt::print(err, "aborted: {}\n", e.what());
            return kRuntimeAbort;
        }
    }
    return ok ? kPass : kCheckFailed;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    configure_logging_from_env();

    CLI::App app{"Two-level load balancer and deterministic simulator", "ruperlb"};
    app.require_subcommand(1);

    RunOptions run;
    std::string run_mode;
    std::uint64_t run_seed = 0;
    auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write CSVs");
    run_cmd->add_option("--scenario", run.scenario, "Scenario JSON file")->required();
    run_cmd->add_option("--out", run.out, "Output directory")->required();
    auto* mode_opt = run_cmd->add_option("--mode", run_mode, "balanced, static or both")
                         ->check(CLI::IsMember({"balanced", "static", "both"}));
    auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override the scenario's rng_seed");

    std::filesystem::path validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file and print it normalized");
    validate_cmd->add_option("--scenario", validate_path, "Scenario JSON file")->required();

    DemoOptions demo;
    Seconds dtpc = 2.0;
    Seconds tmin = 0.0;
    double dsmax = 0.2;
    std::string listen;
    std::string connect;
    std::optional<std::filesystem::path> demo_out;
    std::string demo_out_text;
    auto* demo_cmd = app.add_subcommand("demo", "Monte Carlo pi on real threads");
    demo_cmd->add_option("--threads", demo.threads, "Worker threads")->required()->check(CLI::PositiveNumber);
    demo_cmd->add_option("--budget", demo.budget, "Iterations (points) in total")->required();
    demo_cmd->add_option("--dtpc", dtpc, "Checkpoint interval in seconds");
    auto* tmin_opt = demo_cmd->add_option("--tmin", tmin, "Remaining-time threshold in seconds (default dtpc/6)");
    demo_cmd->add_option("--dsmax", dsmax, "Maximum speed deviation");
    auto* listen_opt = demo_cmd->add_option("--listen", listen, "host:port to serve as rank 0");
    auto* connect_opt = demo_cmd->add_option("--connect", connect, "host:port of rank 0");
    listen_opt->excludes(connect_opt);
    demo_cmd->add_option("--rank", demo.rank, "This process's rank (with --connect)");
    demo_cmd->add_option("--procs", demo.procs, "Number of processes")->check(CLI::PositiveNumber);
    demo_cmd->add_option("--seed", demo.seed, "Random seed");
    demo_cmd->add_option("--out", demo_out_text, "Directory for demo_summary.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kPass;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kPass;
    } catch (const CLI::ParseError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kConfigError;
    }

    if (run_cmd->parsed()) {
        if (*mode_opt) {
            run.mode = parse_run_mode(run_mode);
        }
        if (*seed_opt) {
            run.seed = run_seed;
        }
        return cmd_run(run, out, err);
    }
    if (validate_cmd->parsed()) {
        return cmd_validate(validate_path, out, err);
    }
    demo.params = {dtpc, *tmin_opt ? tmin : dtpc / 6.0, dsmax};
    try {
        demo.params.validate();
    } catch (const InvalidArgument& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kConfigError;
    }
    if (*listen_opt) {
        demo.listen = listen;
    }
    if (*connect_opt) {
        demo.connect = connect;
    }
    if (!demo_out_text.empty()) {
        demo_out = demo_out_text;
    }
    return cmd_demo(demo, demo_out, out, err);
}

} // namespace ruperlb::cli
