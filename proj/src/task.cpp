#include "ruperlb/task.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ruperlb {

const char* to_string(FinishVerdict verdict) {
    switch (verdict) {
    case FinishVerdict::NeedReport: return "need_report";
    case FinishVerdict::Rebalanced: return "rebalanced";
    case FinishVerdict::Granted: return "granted";
    case FinishVerdict::ForwardedToCoordinator: return "forwarded";
    }
    return "unknown";
}

Task::Task(BalanceParams params, const Clock& clock) : params_(params), clock_(clock) {
    params_.validate();
}

void Task::start(std::size_t n_workers, Iterations budget, Seconds t) {
    if (n_workers == 0) {
        throw InvalidArgument("a task needs at least one worker");
    }
    if (budget <= 0) {
        throw InvalidArgument("task budget must be positive");
    }
    if (budget < static_cast<Iterations>(n_workers)) {
        throw InvalidArgument("task budget must be at least one iteration per worker");
    }
    std::lock_guard lock(mutex_);
    if (started_) {
        throw InvalidArgument("task already started");
    }
    const auto n = static_cast<Iterations>(n_workers);
    workers_.assign(n_workers, Worker{});
    for (std::size_t i = 0; i < n_workers; ++i) {
        const Iterations share = budget / n + (static_cast<Iterations>(i) < budget % n ? 1 : 0);
        workers_[i].start(t, share);
    }
    budget_ = budget;
    start_time_ = t;
    last_checkpoint_ = t;
    started_ = true;
    finished_ = false;
    ++epoch_;
}

void Task::check_index(std::size_t i) const {
    if (i >= workers_.size()) {
        throw InvalidArgument("worker index " + std::to_string(i) + " out of range");
    }
}

void Task::notify_if(bool notify) {
    if (notify && finish_hook_) {
        finish_hook_();
    }
}

void Task::raise_finish_request_locked(bool& notify) {
    if (!finish_requested_) {
        finish_requested_ = true;
        notify = true;
    }
}

Seconds Task::report_locked(std::size_t i, Iterations done_total, Seconds t, bool& notify) {
    Worker& w = workers_[i];
    if (!w.working()) {
        return -1.0;
    }
    Seconds dt = w.elapsed(t);
    const double dev = std::abs(w.add_measure(t, done_total) - 1.0);
    dt = adjust_report_interval(dt, dev, params_);
    if (t - last_checkpoint_ >= params_.checkpoint_interval) {
        checkpoint_locked(t, RedistributionPolicy::Threshold, false, notify);
    }
    return dt;
}

Seconds Task::report(std::size_t i, Iterations done_total, Seconds t) {
    bool notify = false;
    Seconds dt = -1.0;
    {
        std::lock_guard lock(mutex_);
        check_index(i);
        dt = report_locked(i, done_total, t, notify);
    }
    notify_if(notify);
    return dt;
}

RedistributionOutcome Task::checkpoint_locked(Seconds t, RedistributionPolicy policy, bool forced,
                                              bool& notify) {
    if (!started_) {
        throw InvalidArgument("checkpoint on a task that has not started");
    }
    if (t < last_checkpoint_) {
        throw ClockRegression("checkpoint time precedes the previous checkpoint");
    }
    last_checkpoint_ = t;
    CheckpointRecord record;
    record.time = t;
    record.budget = budget_;
    record.forced = forced;
    record.result = redistribute(std::span<Worker>(workers_), budget_, t,
                                 params_.remaining_time_threshold, policy);
    const auto outcome = record.result.outcome;
    if (outcome == RedistributionOutcome::Redistributed ||
        outcome == RedistributionOutcome::ForceFinish) {
        ++epoch_;
    }
    // Close to the end: ask the coordinator whether this process may stop.
    if (coordinator_active_ && !forced &&
        (outcome == RedistributionOutcome::BelowThreshold ||
         outcome == RedistributionOutcome::ForceFinish)) {
        raise_finish_request_locked(notify);
    }
    if (observer_) {
        observer_(record, workers_);
    }
    return outcome;
}

RedistributionOutcome Task::checkpoint() {
    return checkpoint(clock_.now());
}

RedistributionOutcome Task::checkpoint(Seconds t) {
    bool notify = false;
    RedistributionOutcome outcome{};
    {
        std::lock_guard lock(mutex_);
        outcome = checkpoint_locked(t, RedistributionPolicy::Threshold, false, notify);
    }
    notify_if(notify);
    return outcome;
}

FinishDecision Task::request_finish(std::size_t i, Iterations done_total, Seconds t) {
    bool notify = false;
    FinishDecision decision;
    {
        std::lock_guard lock(mutex_);
        check_index(i);
        Worker& w = workers_[i];
        if (!w.started()) {
            throw InvalidArgument("finish request from a worker that has not started");
        }
        if (w.finished()) {
            return {FinishVerdict::Granted, -1.0};
        }

        if (w.done() < w.assigned()) {
            if (t > w.last_report_time()) {
                decision.next_report = report_locked(i, done_total, t, notify);
            } else {
                // Same instant as the last report: nothing to measure.
                w.elapsed(t);
                w.register_done(done_total);
            }
            decision.verdict = FinishVerdict::NeedReport;
        } else {
            const auto e = estimate_task(std::span<const Worker>(workers_), budget_, t);
            if (budget_ > e.total_done && e.total_speed > 0.0 &&
                e.remaining_time > params_.remaining_time_threshold) {
                // Another thread may have checkpointed after this caller read its clock.
                checkpoint_locked(std::max(t, last_checkpoint_), RedistributionPolicy::Threshold,
                                  false, notify);
                decision.verdict = FinishVerdict::Rebalanced;
            } else if (coordinator_active_) {
                raise_finish_request_locked(notify);
                decision.verdict = FinishVerdict::ForwardedToCoordinator;
            } else {
                w.finish();
                finished_ = std::all_of(workers_.begin(), workers_.end(),
                                        [](const Worker& x) { return x.finished(); });
                decision.verdict = FinishVerdict::Granted;
            }
        }
    }
    notify_if(notify);
    return decision;
}

void Task::attach_coordinator() {
    std::lock_guard lock(mutex_);
    coordinator_active_ = true;
    finish_requested_ = false;
    finish_sent_ = false;
}

bool Task::coordinator_active() const {
    std::lock_guard lock(mutex_);
    return coordinator_active_;
}

bool Task::finish_requested() const {
    std::lock_guard lock(mutex_);
    return finish_requested_;
}

bool Task::take_finish_request() {
    std::lock_guard lock(mutex_);
    if (!coordinator_active_ || !finish_requested_ || finish_sent_) {
        return false;
    }
    finish_requested_ = false;
    finish_sent_ = true;
    return true;
}

void Task::finish_response_received() {
    std::lock_guard lock(mutex_);
    finish_sent_ = false;
}

void Task::install_budget(Iterations budget, Seconds t, bool coordinator_finished) {
    if (budget < 0) {
        throw InvalidArgument("installed budget must be non-negative");
    }
    bool notify = false;
    std::function<void()> budget_hook;
    {
        std::lock_guard lock(mutex_);
        budget_hook = budget_hook_;
        const bool changed = budget != budget_;
        budget_ = budget;
        if (coordinator_finished) {
            coordinator_active_ = false;
            finish_requested_ = false;
            finish_sent_ = false;
        }
        if (changed) {
            ++epoch_;
            if (started_) {
                checkpoint_locked(std::max(t, last_checkpoint_), RedistributionPolicy::Always, true,
                                  notify);
            }
        }
    }
    notify_if(notify);
    if (budget_hook) {
        budget_hook();
    }
}

void Task::set_budget_hook(std::function<void()> hook) {
    std::lock_guard lock(mutex_);
    budget_hook_ = std::move(hook);
}

void Task::set_finish_request_hook(std::function<void()> hook) {
    std::lock_guard lock(mutex_);
    finish_hook_ = std::move(hook);
}

void Task::set_checkpoint_observer(CheckpointObserver observer) {
    std::lock_guard lock(mutex_);
    observer_ = std::move(observer);
}

double Task::predicted_done(Seconds t) const {
    std::lock_guard lock(mutex_);
    double total = 0.0;
    for (const auto& w : workers_) {
        total += w.pred_done(t);
    }
    return total;
}

Iterations Task::budget() const {
    std::lock_guard lock(mutex_);
    return budget_;
}

Iterations Task::assigned(std::size_t i) const {
    std::lock_guard lock(mutex_);
    check_index(i);
    return workers_[i].assigned();
}

Worker Task::worker(std::size_t i) const {
    std::lock_guard lock(mutex_);
    check_index(i);
    return workers_[i];
}

std::vector<Worker> Task::workers() const {
    std::lock_guard lock(mutex_);
    return workers_;
}

std::size_t Task::size() const {
    std::lock_guard lock(mutex_);
    return workers_.size();
}

bool Task::started() const {
    std::lock_guard lock(mutex_);
    return started_;
}

bool Task::finished() const {
    std::lock_guard lock(mutex_);
    return finished_;
}

Seconds Task::last_checkpoint_time() const {
    std::lock_guard lock(mutex_);
    return last_checkpoint_;
}

std::uint64_t Task::assignment_epoch() const {
    std::lock_guard lock(mutex_);
    return epoch_;
}

} // namespace ruperlb
