#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "ruperlb/worker.hpp"

namespace ruperlb {

/// Tunables shared by the thread-level task and the coordinator.
struct BalanceParams {
    Seconds checkpoint_interval = 30.0;     ///< minimum time between checkpoints
    Seconds remaining_time_threshold = 5.0; ///< balancing stops below this
    double max_speed_deviation = 0.2;       ///< tolerated |s/s_prev - 1|

    /// Parameters with the remaining-time threshold derived from the interval
    /// (one sixth of it) and a 20% deviation band.
    static BalanceParams with_defaults(Seconds checkpoint_interval) {
        return {checkpoint_interval, checkpoint_interval / 6.0, 0.2};
    }

    /// Throws InvalidArgument when a value is out of range.
    void validate() const;

    /// Re-polling period of callers blocked on the coordinator.
    Seconds poll_interval() const { return std::min(remaining_time_threshold, 1.0); }

    friend bool operator==(const BalanceParams&, const BalanceParams&) = default;
};

/// Next report interval from the interval that just elapsed and the absolute
/// speed deviation |dev - 1|. The result is shortened when the speed moved more
/// than allowed, stretched when it is stable, and never exceeds the checkpoint
/// interval.
Seconds adjust_report_interval(Seconds elapsed, double deviation, const BalanceParams& params);

enum class RedistributionOutcome {
    ForceFinish,    ///< budget already reached: working assignments set to done
    Redistributed,  ///< remaining iterations split by speed factor
    BelowThreshold, ///< predicted remaining time too short to be worth it
    NoSpeed,        ///< no working worker has a speed yet
};

const char* to_string(RedistributionOutcome outcome);

enum class RedistributionPolicy {
    Threshold, ///< redistribute only when the remaining time exceeds the threshold
    Always,    ///< redistribute whenever there is work left (budget changes)
};

/// Aggregates used to decide a redistribution.
struct TaskEstimate {
    Iterations total_done = 0;   ///< sum of registered done over all workers
    double total_speed = 0.0;    ///< sum of speeds over working workers
    double predicted_done = 0.0; ///< predicted done for working, registered for the rest
    Seconds remaining_time = std::numeric_limits<double>::infinity();
};

struct RedistributionResult {
    RedistributionOutcome outcome = RedistributionOutcome::NoSpeed;
    TaskEstimate estimate;
};

template <class W>
TaskEstimate estimate_task(std::span<const W> workers, Iterations budget, Seconds t) {
    TaskEstimate e;
    for (const auto& w : workers) {
        e.total_done += w.done();
        if (w.working()) {
            e.total_speed += w.speed();
            e.predicted_done += w.pred_done(t);
        } else {
            e.predicted_done += static_cast<double>(w.done());
        }
    }
    if (e.total_speed > 0.0) {
        e.remaining_time = (static_cast<double>(budget) - e.predicted_done) / e.total_speed;
    }
    return e;
}

/// Splits `remaining` iterations among working workers proportionally to their
/// speed. Shares are floored and the leftover is handed out one iteration at a
/// time in descending speed order (ties by index), so the sum is exact.
template <class W>
void assign_proportional(std::span<W> workers, Iterations remaining, double total_speed) {
    std::vector<std::size_t> order;
    Iterations handed = 0;
    for (std::size_t i = 0; i < workers.size(); ++i) {
        auto& w = workers[i];
        if (!w.working()) {
            continue;
        }
        const double factor = w.speed() / total_speed;
        auto share = static_cast<Iterations>(std::floor(factor * static_cast<double>(remaining)));
        share = std::clamp<Iterations>(share, 0, remaining - handed);
        w.set_assigned(w.done() + share);
        handed += share;
        order.push_back(i);
    }
    if (order.empty()) {
        return;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return workers[a].speed() > workers[b].speed();
    });
    for (std::size_t k = 0; handed < remaining; k = (k + 1) % order.size(), ++handed) {
        auto& w = workers[order[k]];
        w.set_assigned(w.assigned() + 1);
    }
}

/// Splits `remaining` iterations evenly among working workers (remainder to
/// the lowest indices). Fallback when no speed is known.
template <class W>
void assign_even(std::span<W> workers, Iterations remaining) {
    const auto n = std::count_if(workers.begin(), workers.end(),
                                 [](const W& w) { return w.working(); });
    if (n == 0) {
        return;
    }
    const Iterations base = remaining / n;
    Iterations extra = remaining % n;
    for (auto& w : workers) {
        if (!w.working()) {
            continue;
        }
        w.set_assigned(w.done() + base + (extra > 0 ? 1 : 0));
        if (extra > 0) {
            --extra;
        }
    }
}

/// The checkpoint arithmetic shared by local tasks and the coordinator.
template <class W>
RedistributionResult redistribute(std::span<W> workers, Iterations budget, Seconds t,
                                  Seconds remaining_time_threshold,
                                  RedistributionPolicy policy = RedistributionPolicy::Threshold) {
    RedistributionResult r;
    r.estimate = estimate_task(std::span<const W>(workers.data(), workers.size()), budget, t);
    const auto& e = r.estimate;

    if (budget <= e.total_done) {
        for (auto& w : workers) {
            if (w.working()) {
                w.set_assigned(w.done());
            }
        }
        r.outcome = RedistributionOutcome::ForceFinish;
        return r;
    }

    const Iterations remaining = budget - e.total_done;
    if (e.total_speed <= 0.0) {
        if (policy == RedistributionPolicy::Always) {
            assign_even(workers, remaining);
            r.outcome = RedistributionOutcome::Redistributed;
        } else {
            r.outcome = RedistributionOutcome::NoSpeed;
        }
        return r;
    }
    if (policy == RedistributionPolicy::Threshold && e.remaining_time <= remaining_time_threshold) {
        r.outcome = RedistributionOutcome::BelowThreshold;
        return r;
    }
    assign_proportional(workers, remaining, e.total_speed);
    r.outcome = RedistributionOutcome::Redistributed;
    return r;
}

} // namespace ruperlb
