#pragma once

#include <vector>

#include "ruperlb/types.hpp"

namespace ruperlb {

/// One speed sample: seconds since the worker started and the speed measured
/// over the interval that ended at that instant.
struct SpeedMeasure {
    Seconds elapsed_since_start = 0.0;
    double speed = 0.0; ///< iterations per second

    friend bool operator==(const SpeedMeasure&, const SpeedMeasure&) = default;
};

/// Bookkeeping for one thread executing a task.
///
/// A worker only learns about progress through reports: `done()` is the last
/// registered count, not the thread's live count. Speeds are derived from
/// consecutive reports and `speed()` is the latest one.
class Worker {
public:
    Worker() = default;

    /// Marks the worker as started at t with an initial assignment.
    void start(Seconds t, Iterations assigned);

    /// True while the worker is started and has not been allowed to finish.
    bool working() const noexcept { return started_ && !finished_; }

    /// Time since the last report. Throws ClockRegression if t < last report.
    Seconds elapsed(Seconds t) const;

    /// Latest measured speed, or 0 before the first measure.
    double speed() const noexcept;

    /// Registers a report of `done_total` iterations at time t and returns the
    /// ratio between the new speed and the previous one (1 on the first
    /// measure).
    double add_measure(Seconds t, Iterations done_total);

    /// Iterations expected at time t if the speed did not change since the last
    /// report. Non-working workers return their registered count.
    double pred_done(Seconds t) const;

    /// Updates the registered count without a speed sample. Only used when a
    /// report coincides with the previous one in time.
    void register_done(Iterations done_total);

    void set_assigned(Iterations assigned) noexcept { assigned_ = assigned; }
    void finish() noexcept { finished_ = true; }

    Iterations assigned() const noexcept { return assigned_; }
    Iterations done() const noexcept { return done_; }
    bool started() const noexcept { return started_; }
    bool finished() const noexcept { return finished_; }
    Seconds last_report_time() const noexcept { return last_report_; }
    Seconds start_time() const noexcept { return start_time_; }
    const std::vector<SpeedMeasure>& measures() const noexcept { return measures_; }

protected:
    /// Appends a measure and moves the report state forward.
    void record(Seconds t, Iterations done_total, double speed);

    Iterations assigned_ = 0;
    Iterations done_ = 0;
    bool started_ = false;
    bool finished_ = false;
    Seconds last_report_ = 0.0;
    Seconds start_time_ = 0.0;
    std::vector<SpeedMeasure> measures_;
};

/// Coordinator-side view of a whole remote process.
///
/// Reports carry *predicted* totals, which may go down when the process slows,
/// so the speed is corrected by how far the prediction strayed from what the
/// previous speed expected.
class GuessWorker : public Worker {
public:
    /// Registers a predicted total at time t and returns the speed deviation.
    double add_measure(Seconds t, Iterations predicted_done);

    /// Replaces the registered prediction without a speed sample (a second
    /// report at the same instant).
    void register_prediction(Iterations predicted_done);

private:
    double base_measure(Seconds t, Iterations predicted_done);
};

} // namespace ruperlb
