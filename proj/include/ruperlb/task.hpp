#pragma once

#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <vector>

#include "ruperlb/clock.hpp"
#include "ruperlb/redistribution.hpp"
#include "ruperlb/worker.hpp"

namespace ruperlb {

enum class FinishVerdict {
    NeedReport,             ///< registered done was below the assignment; a report was made
    Rebalanced,             ///< too much work left; a checkpoint reassigned iterations
    Granted,                ///< the worker may leave the task
    ForwardedToCoordinator, ///< local rules allow it, but the coordinator still balances
};

const char* to_string(FinishVerdict verdict);

struct FinishDecision {
    FinishVerdict verdict = FinishVerdict::Granted;
    /// Suggested time until the next report when the call performed one,
    /// negative otherwise.
    Seconds next_report = -1.0;
};

/// What happened at a checkpoint, passed to the checkpoint observer.
struct CheckpointRecord {
    Seconds time = 0.0;
    Iterations budget = 0;
    RedistributionResult result;
    bool forced = false; ///< triggered by a budget change rather than the schedule
};

/// Thread-level balancer for one task.
///
/// Workers (threads) report completed iterations; the task periodically
/// redistributes the remaining budget proportionally to the measured speeds and
/// decides when a worker may stop. Every public member locks the task, so one
/// instance can be driven from any number of threads plus a coordinator
/// monitor. The task itself never spawns threads.
///
/// When attached to a coordinator the budget is owned by rank 0: the local
/// finish rules still apply, but a worker that would be allowed to leave is
/// told to wait while the process asks the coordinator for more work.
class Task {
public:
    using CheckpointObserver = std::function<void(const CheckpointRecord&, std::span<const Worker>)>;

    Task(BalanceParams params, const Clock& clock);

    Task(const Task&) = delete;
    Task& operator=(const Task&) = delete;

    /// Creates `n_workers` workers and splits `budget` evenly (the remainder
    /// goes one iteration each to the first workers).
    void start(std::size_t n_workers, Iterations budget, Seconds t);

    /// Registers a report from worker i and returns the suggested time until
    /// its next report, or -1 if the worker is not working. Runs a checkpoint
    /// when the checkpoint interval has elapsed.
    Seconds report(std::size_t i, Iterations done_total, Seconds t);

    /// Redistributes the remaining iterations at the clock's current time.
    RedistributionOutcome checkpoint();
    RedistributionOutcome checkpoint(Seconds t);

    /// Arbitrates a request from worker i to leave the task.
    FinishDecision request_finish(std::size_t i, Iterations done_total, Seconds t);

    // -- coordinator link -------------------------------------------------

    /// Puts the task under coordinator control (multi-process runs).
    void attach_coordinator();
    bool coordinator_active() const;

    /// Whether the coordinator finish-request flag is raised.
    bool finish_requested() const;

    /// Consumes a pending finish request: if the flag is raised and no request
    /// is in flight, lowers it, marks one as sent and returns true.
    bool take_finish_request();

    /// A response to the in-flight finish request arrived.
    void finish_response_received();

    /// Installs a budget decided by the coordinator. A changed budget forces a
    /// checkpoint that redistributes regardless of the remaining time. Once
    /// `coordinator_finished` is true the link is dropped and local rules apply.
    void install_budget(Iterations budget, Seconds t, bool coordinator_finished);

    /// Called (outside the task lock) whenever the finish-request flag is raised.
    void set_finish_request_hook(std::function<void()> hook);

    /// Called (outside the task lock) after every install_budget, so callers
    /// blocked on the coordinator can re-check without waiting for their poll.
    void set_budget_hook(std::function<void()> hook);

    /// Called under the task lock after every checkpoint. Must not call back
    /// into the task.
    void set_checkpoint_observer(CheckpointObserver observer);

    // -- queries ----------------------------------------------------------

    /// Sum of predicted done over all workers at time t.
    double predicted_done(Seconds t) const;

    Iterations budget() const;
    Iterations assigned(std::size_t i) const;
    Worker worker(std::size_t i) const;
    std::vector<Worker> workers() const;
    std::size_t size() const;
    bool started() const;
    bool finished() const;
    Seconds last_checkpoint_time() const;
    const BalanceParams& params() const noexcept { return params_; }

    /// Incremented whenever any assignment or the budget changes.
    std::uint64_t assignment_epoch() const;

private:
    Seconds report_locked(std::size_t i, Iterations done_total, Seconds t, bool& notify);
    RedistributionOutcome checkpoint_locked(Seconds t, RedistributionPolicy policy, bool forced,
                                            bool& notify);
    void raise_finish_request_locked(bool& notify);
    void check_index(std::size_t i) const;
    void notify_if(bool notify);

    const BalanceParams params_;
    const Clock& clock_;

    mutable std::mutex mutex_;
    Iterations budget_ = 0;
    std::vector<Worker> workers_;
    Seconds start_time_ = 0.0;
    Seconds last_checkpoint_ = 0.0;
    bool started_ = false;
    bool finished_ = false;
    std::uint64_t epoch_ = 0;

    bool coordinator_active_ = false;
    bool finish_requested_ = false;
    bool finish_sent_ = false;

    std::function<void()> finish_hook_;
    std::function<void()> budget_hook_;
    CheckpointObserver observer_;
};

} // namespace ruperlb
