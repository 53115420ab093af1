#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ruperlb/clock.hpp"
#include "ruperlb/protocol.hpp"
#include "ruperlb/redistribution.hpp"
#include "ruperlb/task.hpp"
#include "ruperlb/transport.hpp"
#include "ruperlb/worker.hpp"

namespace ruperlb {

/// Result of handling a Report or FinishRequest on rank 0.
struct ReportOutcome {
    Response response;
    Seconds next_interval = 0.0; ///< suggested time until the origin's next report
    double deviation = 1.0;      ///< speed ratio returned by the guess worker
    std::optional<RedistributionResult> rebalance; ///< set when a global rebalance ran
};

/// Passed to the rebalance observer after every global redistribution attempt.
struct RebalanceRecord {
    Seconds time = 0.0;
    Rank origin = 0;
    Iterations global_budget = 0;
    RedistributionResult result;
};

/// Rank-0 bookkeeping for process-level balancing.
///
/// Each process is tracked by a GuessWorker fed with the process's *predicted*
/// totals. Every report triggers the same redistribution used by local
/// checkpoints, over processes instead of threads, until the predicted
/// remaining time drops below the threshold; from then on per-process
/// assignments are frozen and every process is told balancing is over.
///
/// All times handed to this class must be in one clock domain; the monitor
/// translates remote timestamps before calling in. Not thread-safe: it is owned
/// by the rank-0 monitor thread.
class Coordinator {
public:
    using RebalanceObserver = std::function<void(const RebalanceRecord&, std::span<const GuessWorker>)>;

    Coordinator(std::size_t process_count, Iterations global_budget, BalanceParams params);

    /// Start petition from `origin`: marks its guess worker started at t and
    /// returns an even share of what is predicted to be left.
    Response start(Rank origin, Seconds t);

    /// Handles a Report or FinishRequest.
    ReportOutcome receive_report(const Message& request);

    /// Predicted iterations done by all processes at time t.
    Iterations done_global(Seconds t) const;

    /// Sum of working assignments plus the totals of finished processes.
    Iterations assignment_total() const;

    bool finished() const noexcept { return finished_; }
    bool all_started() const;
    bool notified(Rank rank) const { return notified_.at(rank); }
    bool all_notified() const;

    std::size_t process_count() const noexcept { return guesses_.size(); }
    Iterations global_budget() const noexcept { return global_budget_; }
    const BalanceParams& params() const noexcept { return params_; }
    const GuessWorker& guess_worker(Rank rank) const { return guesses_.at(rank); }
    std::span<const GuessWorker> guess_workers() const noexcept { return guesses_; }

    void set_rebalance_observer(RebalanceObserver observer) { observer_ = std::move(observer); }

private:
    GuessWorker& checked(Rank rank);

    const BalanceParams params_;
    const Iterations global_budget_;
    std::vector<GuessWorker> guesses_;
    std::vector<bool> notified_;
    bool finished_ = false;
    RebalanceObserver observer_;
};

/// Rank-0 monitor loop.
///
/// Keeps one report timer per process, asks for reports when they expire and
/// serves Start, Report and FinishRequest petitions. Rank 0's own task takes
/// part through a loopback path: its report requests, reports, finish
/// petitions and responses never touch the transport.
class CoordinatorMonitor {
public:
    static constexpr Seconds kNoTimeout = 1e9;

    CoordinatorMonitor(Coordinator& coordinator, CoordinatorTransport& transport, const Clock& clock,
                       Task& local_task);

    /// Start petition of rank 0's own task: starts the local task with
    /// `n_workers` workers on the returned budget and attaches it.
    Iterations start_local(std::size_t n_workers);

    /// One pass of the loop body after a wait returned `request` having spent
    /// `elapsed` seconds. Returns the timeout for the next wait.
    Seconds step(const std::optional<Message>& request, Seconds elapsed);

    /// Waits and steps until every process was told balancing is over.
    void run();

    bool done() const noexcept { return done_; }
    Seconds timeout() const noexcept { return timeout_; }
    std::span<const Seconds> next_report_timers() const noexcept { return next_; }
    std::span<const Seconds> report_intervals() const noexcept { return interval_; }

private:
    void handle(const Message& request, Seconds now);
    void respond(Rank rank, const Response& response, Instruction to, Seconds now);
    void arm(Rank rank, Seconds interval);
    Message local_message(Instruction instruction, Seconds now) const;

    Coordinator& coordinator_;
    CoordinatorTransport& transport_;
    const Clock& clock_;
    Task& local_;

    std::vector<Seconds> interval_; // time between reports per process
    std::vector<Seconds> next_;     // time until next report request, 0 = disarmed
    std::vector<Seconds> offset_;   // remote clock -> rank-0 clock
    std::vector<bool> started_;
    Seconds timeout_ = 0.0;
    bool local_report_pending_ = false;
    bool done_ = false;
};

/// Monitor loop of a rank k > 0.
///
/// Sends the Start petition, answers report requests with the local predicted
/// total, forwards local finish requests and installs every budget the
/// coordinator replies with. Ends when the coordinator declares balancing over.
class WorkerMonitor {
public:
    WorkerMonitor(Rank rank, Task& task, std::size_t n_workers, WorkerTransport& transport,
                  const Clock& clock);

    /// Sends the Start petition.
    void send_start();

    /// Sends the Start petition and waits for the reply; the local task is
    /// started with the received budget. Throws ProtocolError on timeout.
    Iterations handshake(Seconds timeout);

    /// Processes one frame from the coordinator.
    void handle(const WorkerFrame& frame);

    /// Sends a FinishRequest if the local task raised one. Returns true if sent.
    bool poll_finish();

    /// Loop until balancing is over; polls the finish flag between waits.
    void run();

    bool started() const noexcept { return started_; }
    bool done() const noexcept { return done_; }
    Iterations start_budget() const noexcept { return start_budget_; }

private:
    Message snapshot(Instruction instruction) const;

    Rank rank_;
    Task& task_;
    std::size_t n_workers_;
    WorkerTransport& transport_;
    const Clock& clock_;

    std::deque<Instruction> outstanding_;
    bool started_ = false;
    bool done_ = false;
    Iterations start_budget_ = 0;
};

} // namespace ruperlb
