#include "ruperlb/coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

namespace ruperlb {
namespace {

// Timers within this margin of expiry fire now rather than on a wake that
// rounding could make zero-length.
constexpr Seconds kTimerSlack = 1e-9;

} // namespace

// -- Coordinator ---------------------------------------------------------------

Coordinator::Coordinator(std::size_t process_count, Iterations global_budget, BalanceParams params)
    : params_(params), global_budget_(global_budget), guesses_(process_count),
      notified_(process_count, false) {
    params_.validate();
    if (process_count == 0) {
        throw InvalidArgument("coordinator needs at least one process");
    }
    if (global_budget <= 0) {
        throw InvalidArgument("global budget must be positive");
    }
}

GuessWorker& Coordinator::checked(Rank rank) {
    if (rank >= guesses_.size()) {
        throw ProtocolError("unknown origin rank " + std::to_string(rank));
    }
    return guesses_[rank];
}

bool Coordinator::all_started() const {
    return std::all_of(guesses_.begin(), guesses_.end(),
                       [](const GuessWorker& g) { return g.started(); });
}

bool Coordinator::all_notified() const {
    return std::all_of(notified_.begin(), notified_.end(), [](bool b) { return b; });
}

Iterations Coordinator::assignment_total() const {
    Iterations total = 0;
    for (const auto& g : guesses_) {
        total += g.working() ? g.assigned() : g.done();
    }
    return total;
}

Iterations Coordinator::done_global(Seconds t) const {
    double total = 0.0;
    for (const auto& g : guesses_) {
        total += g.pred_done(t);
    }
    return static_cast<Iterations>(std::floor(total));
}

Response Coordinator::start(Rank origin, Seconds t) {
    GuessWorker& g = checked(origin);
    if (g.started()) {
        throw ProtocolError("duplicate start petition from rank " + std::to_string(origin));
    }
    const Iterations left = std::max<Iterations>(0, global_budget_ - done_global(t));
    const Iterations share = left / static_cast<Iterations>(guesses_.size());
    g.start(t, share);
    return {share, finished_};
}

ReportOutcome Coordinator::receive_report(const Message& request) {
    if (request.instruction == Instruction::Start) {
        throw InvalidArgument("start petitions are not reports");
    }
    const Rank origin = request.origin;
    GuessWorker& g = checked(origin);
    if (!g.started()) {
        throw ProtocolError("report from rank " + std::to_string(origin) + " before its start");
    }
    const Seconds t = request.timestamp;

    ReportOutcome out;
    if (t > g.last_report_time()) {
        const Seconds elapsed = g.elapsed(t);
        out.deviation = g.add_measure(t, request.predicted_done);
        out.next_interval =
            adjust_report_interval(elapsed, std::abs(out.deviation - 1.0), params_);
    } else {
        // Second petition at the same instant: keep the previous interval.
        g.elapsed(t);
        g.register_prediction(request.predicted_done);
        out.next_interval = -1.0;
    }

    spdlog::debug("coordinator: rank {} at {:.3f} predicts {} (dev {:.4f}, speed {:.3f})", origin, t,
                  request.predicted_done, out.deviation, g.speed());

    if (!finished_) {
        if (all_started()) {
            RebalanceRecord record;
            record.time = t;
            record.origin = origin;
            record.global_budget = global_budget_;
            // Start shares are floored and late starters get a share of what
            // was left, so the first split may have to restore the total.
            const auto policy = assignment_total() == global_budget_
                                    ? RedistributionPolicy::Threshold
                                    : RedistributionPolicy::Always;
            record.result = redistribute(std::span<GuessWorker>(guesses_), global_budget_, t,
                                         params_.remaining_time_threshold, policy);
            const auto outcome = record.result.outcome;
            if (outcome == RedistributionOutcome::ForceFinish ||
                outcome == RedistributionOutcome::BelowThreshold) {
                finished_ = true;
            }
            out.rebalance = record.result;
            if (observer_) {
                observer_(record, guesses_);
            }
        } else if (g.assigned() < request.predicted_done) {
            // Not every process has joined yet: no global split is possible,
            // but never hand out less than what is already predicted.
            g.set_assigned(request.predicted_done);
        }
    }

    out.response = {g.assigned(), finished_};
    if (finished_) {
        notified_[origin] = true;
        g.finish();
    }
    return out;
}

// -- CoordinatorMonitor --------------------------------------------------------

CoordinatorMonitor::CoordinatorMonitor(Coordinator& coordinator, CoordinatorTransport& transport,
                                       const Clock& clock, Task& local_task)
    : coordinator_(coordinator), transport_(transport), clock_(clock), local_(local_task),
      interval_(coordinator.process_count(), coordinator.params().checkpoint_interval),
      next_(coordinator.process_count(), 0.0), offset_(coordinator.process_count(), 0.0),
      started_(coordinator.process_count(), false),
      timeout_(coordinator.params().checkpoint_interval) {}

Iterations CoordinatorMonitor::start_local(std::size_t n_workers) {
    if (started_[0]) {
        throw ProtocolError("rank 0 already started");
    }
    const Seconds now = clock_.now();
    const Response r = coordinator_.start(0, now);
    local_.start(n_workers, r.new_assignment, now);
    local_.attach_coordinator();
    started_[0] = true;
    arm(0, interval_[0]);
    done_ = coordinator_.all_notified();
    return r.new_assignment;
}

void CoordinatorMonitor::arm(Rank rank, Seconds interval) {
    if (coordinator_.notified(rank)) {
        next_[rank] = 0.0;
        return;
    }
    next_[rank] = interval;
    timeout_ = std::min(timeout_, interval);
}

Message CoordinatorMonitor::local_message(Instruction instruction, Seconds now) const {
    const auto predicted = static_cast<Iterations>(std::floor(local_.predicted_done(now)));
    return {instruction, 0, now, predicted};
}

Seconds CoordinatorMonitor::step(const std::optional<Message>& request, Seconds elapsed) {
    const Seconds now = clock_.now();
    for (Rank i = 0; i < next_.size(); ++i) {
        if (next_[i] <= 0.0) {
            continue;
        }
        if (next_[i] <= elapsed + kTimerSlack) {
            if (i == 0) {
                local_report_pending_ = true;
            } else {
                transport_.request_report(i);
            }
            next_[i] = 0.0;
        } else {
            next_[i] -= elapsed;
        }
    }

    if (request) {
        handle(*request, now);
    }
    if (!coordinator_.notified(0)) {
        // A finish petition carries a report, so it also answers a pending
        // report request.
        if (local_.take_finish_request()) {
            local_report_pending_ = false;
            handle(local_message(Instruction::FinishRequest, now), now);
        } else if (local_report_pending_) {
            local_report_pending_ = false;
            handle(local_message(Instruction::Report, now), now);
        }
    }
    done_ = coordinator_.all_notified();
    timeout_ = kNoTimeout;
    for (const Seconds next : next_) {
        if (next > 0.0) {
            timeout_ = std::min(timeout_, next);
        }
    }
    return timeout_;
}

void CoordinatorMonitor::handle(const Message& request, Seconds now) {
    const Rank origin = request.origin;
    if (origin >= coordinator_.process_count()) {
        throw ProtocolError("petition from unknown rank " + std::to_string(origin));
    }
    if (coordinator_.notified(origin)) {
        return; // stale petition crossed the final response
    }
    switch (request.instruction) {
    case Instruction::Start: {
        if (origin == 0) {
            throw ProtocolError("rank 0 starts through the loopback path");
        }
        offset_[origin] = now - request.timestamp;
        const Response r = coordinator_.start(origin, now);
        started_[origin] = true;
        transport_.send_response(origin, r);
        arm(origin, interval_[origin]);
        break;
    }
    case Instruction::Report:
    case Instruction::FinishRequest: {
        Message translated = request;
        translated.timestamp += offset_[origin];
        const ReportOutcome out = coordinator_.receive_report(translated);
        respond(origin, out.response, request.instruction, now);
        if (request.instruction == Instruction::Report) {
            if (out.next_interval > 0.0) {
                interval_[origin] = out.next_interval;
            }
            arm(origin, interval_[origin]);
        } else if (coordinator_.notified(origin)) {
            next_[origin] = 0.0;
        }
        break;
    }
    }
}

void CoordinatorMonitor::respond(Rank rank, const Response& response, Instruction to, Seconds now) {
    if (rank == 0) {
        if (to == Instruction::FinishRequest) {
            local_.finish_response_received();
        }
        local_.install_budget(response.new_assignment, now, response.coord_finished);
    } else {
        transport_.send_response(rank, response);
    }
}

void CoordinatorMonitor::run() {
    if (!started_[0]) {
        throw ProtocolError("rank 0 must start its local task before monitoring");
    }
    while (!done_) {
        const Received r = transport_.receive_any(timeout_);
        step(r.message, r.elapsed);
    }
}

// -- WorkerMonitor -------------------------------------------------------------

WorkerMonitor::WorkerMonitor(Rank rank, Task& task, std::size_t n_workers,
                             WorkerTransport& transport, const Clock& clock)
    : rank_(rank), task_(task), n_workers_(n_workers), transport_(transport), clock_(clock) {
    if (rank == 0) {
        throw InvalidArgument("rank 0 runs the coordinator monitor");
    }
}

Message WorkerMonitor::snapshot(Instruction instruction) const {
    const Seconds now = clock_.now();
    Iterations predicted = 0;
    if (instruction != Instruction::Start) {
        predicted = static_cast<Iterations>(std::floor(task_.predicted_done(now)));
    }
    return {instruction, rank_, now, predicted};
}

void WorkerMonitor::send_start() {
    if (!outstanding_.empty() || started_) {
        throw ProtocolError("start petition already sent");
    }
    transport_.send(snapshot(Instruction::Start));
    outstanding_.push_back(Instruction::Start);
}

Iterations WorkerMonitor::handshake(Seconds timeout) {
    send_start();
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::duration<double>(timeout);
    while (!started_) {
        const double left = std::chrono::duration<double>(deadline - clock::now()).count();
        if (left <= 0.0) {
            throw ProtocolError("no reply to the start petition");
        }
        if (auto frame = transport_.receive(left)) {
            handle(*frame);
        }
    }
    return start_budget_;
}

void WorkerMonitor::handle(const WorkerFrame& frame) {
    if (const auto* response = std::get_if<Response>(&frame)) {
        if (outstanding_.empty()) {
            throw ProtocolError("unsolicited response from the coordinator");
        }
        const Instruction answered = outstanding_.front();
        outstanding_.pop_front();
        const Seconds now = clock_.now();
        if (answered == Instruction::Start) {
            start_budget_ = response->new_assignment;
            task_.start(n_workers_, start_budget_, now);
            task_.attach_coordinator();
            started_ = true;
        } else if (answered == Instruction::FinishRequest) {
            task_.finish_response_received();
        }
        if (answered != Instruction::Start || response->coord_finished) {
            task_.install_budget(response->new_assignment, now, response->coord_finished);
        }
        done_ = done_ || response->coord_finished;
        return;
    }
    // Report request.
    if (!started_) {
        throw ProtocolError("report request before the start reply");
    }
    if (done_) {
        return;
    }
    transport_.send(snapshot(Instruction::Report));
    outstanding_.push_back(Instruction::Report);
}

bool WorkerMonitor::poll_finish() {
    if (done_ || !started_ || !task_.take_finish_request()) {
        return false;
    }
    transport_.send(snapshot(Instruction::FinishRequest));
    outstanding_.push_back(Instruction::FinishRequest);
    return true;
}

void WorkerMonitor::run() {
    if (!started_) {
        throw ProtocolError("worker monitor must complete the handshake first");
    }
    const Seconds poll = task_.params().poll_interval();
    while (!done_) {
        poll_finish();
        if (auto frame = transport_.receive(poll)) {
            handle(*frame);
        }
    }
}

} // namespace ruperlb
