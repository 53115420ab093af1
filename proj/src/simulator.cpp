#include "ruperlb/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <queue>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ruperlb/clock.hpp"
#include "ruperlb/coordinator.hpp"
#include "ruperlb/random.hpp"
#include "ruperlb/task.hpp"
#include "ruperlb/transport.hpp"

namespace ruperlb {
namespace {

// Work accumulated from floating-point integrals is truncated with this slack.
constexpr double kWorkSlack = 1e-6;
constexpr Seconds kTimeSlack = 1e-9;

Iterations whole(double work) {
    return static_cast<Iterations>(std::floor(work + kWorkSlack));
}

// Profile speed of one thread times its jitter factor, constant per window.
class ThreadRate {
public:
    ThreadRate(const SpeedProfile& profile, JitterSpec jitter, std::uint64_t key)
        : profile_(&profile), jitter_(jitter), key_(key) {}

    double factor(Seconds t) const {
        if (!jitter_.enabled()) {
            return 1.0;
        }
        const auto window = static_cast<std::uint64_t>(std::max(0.0, std::floor(t / jitter_.window)));
        const double u = static_cast<double>(splitmix64(key_ ^ splitmix64(window)) >> 11) * 0x1.0p-53;
        return 1.0 + jitter_.amplitude * (2.0 * u - 1.0);
    }

    double speed(Seconds t) const { return factor(t) * profile_->speed(t); }

    double integrate(Seconds a, Seconds b) const {
        if (!jitter_.enabled()) {
            return profile_->integrate(a, b);
        }
        double total = 0.0;
        while (a < b) {
            const Seconds end = std::min(window_end(a), b);
            total += factor(a) * profile_->integrate(a, end);
            a = end;
        }
        return total;
    }

    Seconds time_to_accumulate(Seconds a, double amount, Seconds horizon) const {
        if (!jitter_.enabled()) {
            return profile_->time_to_accumulate(a, amount, horizon);
        }
        double left = amount;
        while (a < horizon) {
            const Seconds end = std::min(window_end(a), horizon);
            const double f = factor(a);
            const double piece = f * profile_->integrate(a, end);
            if (piece >= left && f > 0.0) {
                return profile_->time_to_accumulate(a, left / f, end);
            }
            left -= piece;
            a = end;
        }
        return kNever;
    }

private:
    Seconds window_end(Seconds t) const { return (std::floor(t / jitter_.window) + 1.0) * jitter_.window; }

    const SpeedProfile* profile_;
    JitterSpec jitter_;
    std::uint64_t key_;
};

ThreadRate make_rate(const ScenarioConfig& cfg, Rank rank, std::size_t thread) {
    const std::uint64_t key =
        splitmix64(cfg.rng_seed ^ splitmix64((static_cast<std::uint64_t>(rank) << 32) | thread));
    return ThreadRate(cfg.profiles.at(rank).at(thread), cfg.jitter, key);
}

std::vector<ThreadRate> make_rates(const ScenarioConfig& cfg) {
    std::vector<ThreadRate> rates;
    for (Rank r = 0; r < cfg.process_count; ++r) {
        for (std::size_t j = 0; j < cfg.threads_per_process; ++j) {
            rates.push_back(make_rate(cfg, r, j));
        }
    }
    return rates;
}

template <class W>
void check_conservation(ConservationStats& stats, std::span<const W> workers, Iterations budget,
                        bool redistributed, Seconds t, const std::string& where) {
    Iterations total = 0;
    bool below_done = false;
    for (const auto& w : workers) {
        if (w.working()) {
            total += w.assigned();
            below_done = below_done || w.assigned() < w.done();
        } else {
            total += w.done();
        }
    }
    ++stats.checks;
    std::string problem;
    if (redistributed && total != budget) {
        problem = fmt::format("sum of assignments {} != budget {}", total, budget);
    } else if (total < budget) {
        problem = fmt::format("sum of assignments {} < budget {}", total, budget);
    } else if (redistributed && below_done) {
        problem = "an assignment fell below the registered done";
    }
    if (!problem.empty()) {
        ++stats.violations;
        if (stats.first_violations.size() < 10) {
            stats.first_violations.push_back(fmt::format("t={:.6f} {}: {}", t, where, problem));
        }
    }
}

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg)
        : cfg_(cfg), poll_(cfg.params.poll_interval()),
          net_(cfg.process_count, clock_, InMemoryNetwork::Mode::Virtual) {}

    ScenarioResult run();

private:
    enum class Kind { Thread, Coordinator, CoordinatorTimeout, Monitor };

    struct Event {
        Seconds time;
        std::uint64_t seq;
        Kind kind;
        Rank rank;
        std::size_t thread;
        std::uint64_t version;

        bool operator>(const Event& o) const {
            return time != o.time ? time > o.time : seq > o.seq;
        }
    };

    enum class State { Idle, Running, Blocked, Finished };

    struct SimThread {
        ThreadRate rate;
        State state = State::Idle;
        double work = 0.0;
        Seconds last = 0.0;
        Seconds start = 0.0;
        Seconds next_report = 0.0;
        Seconds next_poll = 0.0;
        Seconds last_report = 0.0;
        Seconds last_interval = 0.0;
        Seconds finish = 0.0;
        std::uint64_t version = 0;
    };

    struct SimRank {
        std::unique_ptr<Task> task;
        std::unique_ptr<WorkerMonitor> monitor;
        std::vector<SimThread> threads;
        std::uint64_t seen_epoch = 0;
        std::vector<Iterations> shown_assigned;
        bool threads_started = false;
    };

    void schedule(Kind kind, Seconds t, Rank rank = 0, std::size_t thread = 0, std::uint64_t version = 0) {
        queue_.push({std::max(t, clock_.now()), seq_++, kind, rank, thread, version});
    }

    void emit(Rank rank, int thread, TimelineKind kind, double value) {
        result_.timeline.push_back({clock_.now(), rank, thread, kind, value});
    }

    void setup();
    void dispatch(const Event& e);
    void after_event();
    void step_thread(Rank r, std::size_t j);
    void finish_flow(Rank r, std::size_t j, Iterations done);
    void reschedule(Rank r, std::size_t j);
    void record_report(Rank r, std::size_t j, Iterations done, Seconds interval);
    void wake_coordinator();
    void wake_monitor(Rank r);
    bool all_finished() const;

    const ScenarioConfig& cfg_;
    const Seconds poll_;
    ManualClock clock_;
    InMemoryNetwork net_;
    std::unique_ptr<Coordinator> coordinator_;
    std::unique_ptr<CoordinatorMonitor> coord_monitor_;
    std::uint64_t coord_version_ = 0;
    std::vector<SimRank> ranks_;
    std::vector<Iterations> shown_process_assigned_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t seq_ = 0;
    Seconds cap_ = 0.0;
    ScenarioResult result_;
};

void Simulation::setup() {
    const std::size_t P = cfg_.process_count;
    ranks_.resize(P);
    shown_process_assigned_.assign(P, 0);
    for (Rank r = 0; r < P; ++r) {
        auto& rank = ranks_[r];
        rank.task = std::make_unique<Task>(cfg_.params, clock_);
        for (std::size_t j = 0; j < cfg_.threads_per_process; ++j) {
            rank.threads.push_back(SimThread{make_rate(cfg_, r, j)});
        }
        rank.shown_assigned.assign(cfg_.threads_per_process, 0);
        rank.task->set_checkpoint_observer(
            [this, r](const CheckpointRecord& rec, std::span<const Worker> workers) {
                ++result_.checkpoints;
                const bool redistributed = rec.result.outcome == RedistributionOutcome::Redistributed;
                if (redistributed) {
                    ++result_.redistributions;
                }
                result_.timeline.push_back(
                    {rec.time, r, -1, TimelineKind::Checkpoint, static_cast<double>(rec.budget)});
                check_conservation(result_.conservation, workers, rec.budget,
                                   redistributed, rec.time, fmt::format("rank {} checkpoint", r));
            });
    }

    if (P == 1) {
        ranks_[0].task->start(cfg_.threads_per_process, cfg_.global_budget, 0.0);
        return;
    }

    coordinator_ = std::make_unique<Coordinator>(P, cfg_.global_budget, cfg_.params);
    coordinator_->set_rebalance_observer(
        [this](const RebalanceRecord& rec, std::span<const GuessWorker> guesses) {
            ++result_.coordinator_rebalances;
            const bool redistributed = rec.result.outcome == RedistributionOutcome::Redistributed;
            check_conservation(result_.conservation, guesses, rec.global_budget, redistributed,
                               rec.time, fmt::format("coordinator report from rank {}", rec.origin));
            for (Rank r = 0; r < guesses.size(); ++r) {
                if (guesses[r].assigned() != shown_process_assigned_[r]) {
                    shown_process_assigned_[r] = guesses[r].assigned();
                    result_.timeline.push_back({rec.time, r, -1, TimelineKind::Reassign,
                                                static_cast<double>(guesses[r].assigned())});
                }
            }
        });
    coord_monitor_ = std::make_unique<CoordinatorMonitor>(*coordinator_, net_.coordinator(), clock_,
                                                          *ranks_[0].task);
    net_.set_delivery_hook([this](Endpoint to) {
        if (to.coordinator) {
            schedule(Kind::Coordinator, clock_.now());
        } else {
            schedule(Kind::Monitor, clock_.now(), to.rank);
        }
    });
    ranks_[0].task->set_finish_request_hook([this] { schedule(Kind::Coordinator, clock_.now()); });
    for (Rank r = 1; r < P; ++r) {
        auto& rank = ranks_[r];
        rank.task->set_finish_request_hook([this, r] { schedule(Kind::Monitor, clock_.now(), r); });
        rank.monitor = std::make_unique<WorkerMonitor>(r, *rank.task, cfg_.threads_per_process,
                                                       net_.worker(r), clock_);
    }
    shown_process_assigned_[0] = coord_monitor_->start_local(cfg_.threads_per_process);
    for (Rank r = 1; r < P; ++r) {
        ranks_[r].monitor->send_start();
    }
    schedule(Kind::CoordinatorTimeout, coord_monitor_->timeout(), 0, 0, coord_version_);
}

void Simulation::wake_coordinator() {
    const Received received = net_.coordinator().receive_any(0.0);
    const Seconds timeout = coord_monitor_->step(received.message, received.elapsed);
    if (net_.pending({true, 0}) > 0) {
        schedule(Kind::Coordinator, clock_.now());
    }
    ++coord_version_;
    if (!coord_monitor_->done()) {
        schedule(Kind::CoordinatorTimeout, clock_.now() + timeout, 0, 0, coord_version_);
    }
}

void Simulation::wake_monitor(Rank r) {
    auto& monitor = *ranks_[r].monitor;
    while (auto frame = net_.worker(r).receive(0.0)) {
        const bool was_started = monitor.started();
        monitor.handle(*frame);
        if (!was_started && monitor.started()) {
            shown_process_assigned_[r] = monitor.start_budget();
        }
    }
    monitor.poll_finish();
}

void Simulation::record_report(Rank r, std::size_t j, Iterations done, Seconds interval) {
    auto& th = ranks_[r].threads[j];
    const Seconds now = clock_.now();
    th.last_report = now;
    if (interval > 0.0) {
        th.last_interval = interval;
        th.next_report = now + interval;
    }
    emit(r, static_cast<int>(j), TimelineKind::Report, static_cast<double>(done));
    if (now > th.start) {
        emit(r, static_cast<int>(j), TimelineKind::Speed, static_cast<double>(done) / (now - th.start));
    }
}

void Simulation::finish_flow(Rank r, std::size_t j, Iterations done) {
    auto& rank = ranks_[r];
    auto& th = rank.threads[j];
    const Seconds now = clock_.now();
    for (int attempt = 0; attempt < 4; ++attempt) {
        emit(r, static_cast<int>(j), TimelineKind::FinishRequest, static_cast<double>(done));
        const FinishDecision d = rank.task->request_finish(j, done, now);
        switch (d.verdict) {
        case FinishVerdict::NeedReport:
            record_report(r, j, done, d.next_report);
            if (rank.task->assigned(j) > done) {
                th.state = State::Running;
                return;
            }
            continue;
        case FinishVerdict::Rebalanced:
            if (rank.task->assigned(j) > done) {
                th.state = State::Running;
                return;
            }
            break;
        case FinishVerdict::ForwardedToCoordinator:
            break;
        case FinishVerdict::Granted:
            th.state = State::Finished;
            th.finish = now;
            emit(r, static_cast<int>(j), TimelineKind::FinishGrant, static_cast<double>(done));
            return;
        }
        break;
    }
    th.state = State::Blocked;
    th.next_poll = now + poll_;
}

void Simulation::step_thread(Rank r, std::size_t j) {
    auto& rank = ranks_[r];
    auto& th = rank.threads[j];
    const Seconds now = clock_.now();
    if (now > th.last) {
        th.work += th.rate.integrate(th.last, now);
        th.last = now;
    }
    const Iterations done = whole(th.work);

    if (th.state == State::Running) {
        if (now + kTimeSlack >= th.next_report) {
            const Seconds interval = rank.task->report(j, done, now);
            record_report(r, j, done, interval);
        }
        if (done >= rank.task->assigned(j)) {
            finish_flow(r, j, done);
        }
    } else if (th.state == State::Blocked && now + kTimeSlack >= th.next_poll) {
        if (rank.task->assigned(j) > done) {
            th.state = State::Running;
            th.next_report = std::max(th.next_report, now);
        } else {
            finish_flow(r, j, done);
        }
    }
    reschedule(r, j);
}

void Simulation::reschedule(Rank r, std::size_t j) {
    auto& rank = ranks_[r];
    auto& th = rank.threads[j];
    ++th.version;
    const Seconds now = clock_.now();
    Seconds next = kNever;
    if (th.state == State::Running) {
        const double need = static_cast<double>(rank.task->assigned(j)) - th.work;
        Seconds exhaust = th.last;
        if (need > kWorkSlack) {
            exhaust = th.rate.time_to_accumulate(th.last, need, cap_ + 1.0);
            if (exhaust <= now && whole(th.work) < rank.task->assigned(j)) {
                // The solver landed on the current instant: credit the
                // rounding residue instead of spinning on zero-length steps.
                th.work = static_cast<double>(rank.task->assigned(j));
                th.last = now;
            }
        }
        next = std::min(th.next_report, std::max(exhaust, now));
    } else if (th.state == State::Blocked) {
        next = th.next_poll;
    } else {
        return;
    }
    if (std::isinf(next)) {
        next = cap_ + 1.0;
    }
    schedule(Kind::Thread, next, r, j, th.version);
}

void Simulation::after_event() {
    const Seconds now = clock_.now();
    for (Rank r = 0; r < ranks_.size(); ++r) {
        auto& rank = ranks_[r];
        if (!rank.threads_started) {
            if (!rank.task->started()) {
                continue;
            }
            rank.threads_started = true;
            for (auto& th : rank.threads) {
                th.state = State::Running;
                th.start = th.last = th.last_report = now;
                th.next_report = now + cfg_.initial_report_interval;
            }
        }
        const auto epoch = rank.task->assignment_epoch();
        if (epoch == rank.seen_epoch) {
            continue;
        }
        rank.seen_epoch = epoch;
        const auto workers = rank.task->workers();
        for (std::size_t j = 0; j < rank.threads.size(); ++j) {
            if (workers[j].assigned() != rank.shown_assigned[j]) {
                rank.shown_assigned[j] = workers[j].assigned();
                emit(r, static_cast<int>(j), TimelineKind::Reassign,
                     static_cast<double>(workers[j].assigned()));
            }
            if (rank.threads[j].state == State::Running) {
                reschedule(r, j);
            }
        }
    }
}

bool Simulation::all_finished() const {
    return std::all_of(ranks_.begin(), ranks_.end(), [](const SimRank& rank) {
        return std::all_of(rank.threads.begin(), rank.threads.end(),
                           [](const SimThread& th) { return th.state == State::Finished; });
    });
}

void Simulation::dispatch(const Event& e) {
    switch (e.kind) {
    case Kind::Thread: {
        const auto& th = ranks_[e.rank].threads[e.thread];
        if (e.version == th.version && th.state != State::Finished) {
            step_thread(e.rank, e.thread);
        }
        break;
    }
    case Kind::Coordinator:
        wake_coordinator();
        break;
    case Kind::CoordinatorTimeout:
        if (e.version == coord_version_) {
            wake_coordinator();
        }
        break;
    case Kind::Monitor:
        wake_monitor(e.rank);
        break;
    }
}

ScenarioResult Simulation::run() {
    result_.scenario = cfg_.name;
    result_.mode = RunMode::Balanced;
    result_.budget = cfg_.global_budget;
    result_.ideal_makespan = ideal_makespan(cfg_);
    cap_ = cfg_.time_cap_factor * result_.ideal_makespan;

    setup();
    after_event();
    while (!all_finished()) {
        if (queue_.empty()) {
            throw NonTerminating("simulation stalled with unfinished threads");
        }
        const Event e = queue_.top();
        queue_.pop();
        if (e.time > cap_) {
            throw NonTerminating(fmt::format(
                "virtual time passed {:.1f} s ({}x the ideal makespan of {:.1f} s)", cap_,
                cfg_.time_cap_factor, result_.ideal_makespan));
        }
        clock_.set(e.time);
        dispatch(e);
        after_event();
    }

    result_.rank_finish.assign(cfg_.process_count, 0.0);
    result_.measures.resize(cfg_.process_count);
    for (Rank r = 0; r < ranks_.size(); ++r) {
        const auto workers = ranks_[r].task->workers();
        for (std::size_t j = 0; j < ranks_[r].threads.size(); ++j) {
            const auto& th = ranks_[r].threads[j];
            ThreadResult tr;
            tr.rank = r;
            tr.thread = j;
            tr.finish = th.finish;
            tr.iterations = whole(th.work);
            tr.last_report = th.last_report;
            tr.last_interval = th.last_interval;
            tr.final_speed = th.rate.speed(th.finish);
            result_.threads.push_back(tr);
            result_.total_executed += tr.iterations;
            result_.overshoot_bound +=
                tr.final_speed * std::max(tr.last_interval, tr.finish - tr.last_report);
            result_.rank_finish[r] = std::max(result_.rank_finish[r], tr.finish);
            result_.measures[r].push_back(workers[j].measures());
        }
    }
    result_.makespan = *std::max_element(result_.rank_finish.begin(), result_.rank_finish.end());
    return std::move(result_);
}

ScenarioResult run_static(const ScenarioConfig& cfg) {
    ScenarioResult result;
    result.scenario = cfg.name;
    result.mode = RunMode::Static;
    result.budget = cfg.global_budget;
    result.ideal_makespan = ideal_makespan(cfg);
    const Seconds cap = cfg.time_cap_factor * result.ideal_makespan;

    const auto n = static_cast<Iterations>(cfg.total_threads());
    const Iterations base = cfg.global_budget / n;
    const Iterations extra = cfg.global_budget % n;
    result.rank_finish.assign(cfg.process_count, 0.0);
    result.measures.assign(cfg.process_count,
                           std::vector<std::vector<SpeedMeasure>>(cfg.threads_per_process));
    Iterations k = 0;
    for (Rank r = 0; r < cfg.process_count; ++r) {
        for (std::size_t j = 0; j < cfg.threads_per_process; ++j, ++k) {
            const Iterations share = base + (k < extra ? 1 : 0);
            const ThreadRate rate = make_rate(cfg, r, j);
            const Seconds finish = rate.time_to_accumulate(0.0, static_cast<double>(share), cap);
            if (std::isinf(finish)) {
                throw NonTerminating(fmt::format(
                    "rank {} thread {} cannot finish its static share of {} iterations within "
                    "{:.1f} s",
                    r, j, share, cap));
            }
            ThreadResult tr;
            tr.rank = r;
            tr.thread = j;
            tr.finish = finish;
            tr.iterations = share;
            tr.final_speed = rate.speed(finish);
            result.threads.push_back(tr);
            result.total_executed += share;
            result.rank_finish[r] = std::max(result.rank_finish[r], finish);
            result.timeline.push_back(
                {finish, r, static_cast<int>(j), TimelineKind::FinishGrant, static_cast<double>(share)});
        }
    }
    std::stable_sort(result.timeline.begin(), result.timeline.end(),
                     [](const TimelineEvent& a, const TimelineEvent& b) { return a.time < b.time; });
    result.conservation.checks = 1;
    result.makespan = *std::max_element(result.rank_finish.begin(), result.rank_finish.end());
    return result;
}

} // namespace

const char* to_string(TimelineKind kind) {
    switch (kind) {
    case TimelineKind::Report: return "report";
    case TimelineKind::Checkpoint: return "checkpoint";
    case TimelineKind::Reassign: return "reassign";
    case TimelineKind::FinishRequest: return "finish_request";
    case TimelineKind::FinishGrant: return "finish_grant";
    case TimelineKind::Speed: return "speed";
    }
    return "unknown";
}

Seconds ScenarioResult::rank_spread() const {
    if (rank_finish.empty()) {
        return 0.0;
    }
    const auto [lo, hi] = std::minmax_element(rank_finish.begin(), rank_finish.end());
    return *hi - *lo;
}

Seconds ScenarioResult::thread_spread(Rank rank) const {
    Seconds lo = kNever;
    Seconds hi = -kNever;
    for (const auto& t : threads) {
        if (t.rank == rank) {
            lo = std::min(lo, t.finish);
            hi = std::max(hi, t.finish);
        }
    }
    return hi >= lo ? hi - lo : 0.0;
}

Seconds ScenarioResult::max_thread_spread() const {
    Seconds worst = 0.0;
    for (Rank r = 0; r < rank_finish.size(); ++r) {
        worst = std::max(worst, thread_spread(r));
    }
    return worst;
}

double thread_speed(const ScenarioConfig& cfg, Rank rank, std::size_t thread, Seconds t) {
    return make_rate(cfg, rank, thread).speed(t);
}

Seconds ideal_makespan(const ScenarioConfig& cfg) {
    const auto rates = make_rates(cfg);
    const auto budget = static_cast<double>(cfg.global_budget);
    const auto total = [&](Seconds t) {
        double sum = 0.0;
        for (const auto& r : rates) {
            sum += r.integrate(0.0, t);
        }
        return sum;
    };
    double s0 = 0.0;
    for (const auto& r : rates) {
        s0 += r.speed(0.0);
    }
    Seconds hi = s0 > 0.0 ? budget / s0 : 1.0;
    while (total(hi) < budget) {
        hi *= 2.0;
        if (hi > 1e12) {
            throw NonTerminating("the aggregate speed never completes the budget");
        }
    }
    Seconds lo = 0.0;
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const Seconds mid = 0.5 * (lo + hi);
        (total(mid) < budget ? lo : hi) = mid;
    }
    return hi;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, RunMode mode) {
    cfg.validate();
    if (mode == RunMode::Both) {
        throw InvalidArgument("run_scenario needs a single mode; use compare_modes");
    }
    if (mode == RunMode::Static) {
        return run_static(cfg);
    }
    Simulation sim(cfg);
    return sim.run();
}

Comparison compare_modes(const ScenarioConfig& cfg) {
    Comparison c;
    c.balanced = run_scenario(cfg, RunMode::Balanced);
    c.static_split = run_scenario(cfg, RunMode::Static);
    c.makespan_ratio = c.balanced.makespan / c.static_split.makespan;
    return c;
}

} // namespace ruperlb
