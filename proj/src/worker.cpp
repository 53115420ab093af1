#include "ruperlb/worker.hpp"

#include <algorithm>

namespace ruperlb {

void Worker::start(Seconds t, Iterations assigned) {
    if (assigned < 0) {
        throw InvalidArgument("worker assignment must be non-negative");
    }
    started_ = true;
    finished_ = false;
    assigned_ = assigned;
    done_ = 0;
    start_time_ = t;
    last_report_ = t;
    measures_.clear();
}

Seconds Worker::elapsed(Seconds t) const {
    if (t < last_report_) {
        throw ClockRegression("report time precedes the last report");
    }
    return t - last_report_;
}

double Worker::speed() const noexcept {
    return measures_.empty() ? 0.0 : measures_.back().speed;
}

double Worker::add_measure(Seconds t, Iterations done_total) {
    if (t <= last_report_) {
        throw ClockRegression("measure time must be after the last report");
    }
    if (done_total < done_) {
        throw ProgressRegression("completed iterations cannot decrease");
    }
    const double previous = speed();
    const double current =
        static_cast<double>(done_total - done_) / (t - last_report_);
    record(t, done_total, current);
    return previous > 0.0 ? current / previous : 1.0;
}

double Worker::pred_done(Seconds t) const {
    if (!working()) {
        return static_cast<double>(done_);
    }
    return static_cast<double>(done_) + speed() * std::max(0.0, t - last_report_);
}

void Worker::register_done(Iterations done_total) {
    if (done_total < done_) {
        throw ProgressRegression("completed iterations cannot decrease");
    }
    done_ = done_total;
}

void Worker::record(Seconds t, Iterations done_total, double speed) {
    done_ = done_total;
    last_report_ = t;
    measures_.push_back({t - start_time_, speed});
}

double GuessWorker::base_measure(Seconds t, Iterations predicted_done) {
    // Same arithmetic as the thread worker, but predictions may regress.
    const double previous = speed();
    const double current =
        std::max(0.0, static_cast<double>(predicted_done - done_) / (t - last_report_));
    record(t, predicted_done, current);
    return previous > 0.0 ? current / previous : 1.0;
}

void GuessWorker::register_prediction(Iterations predicted_done) {
    if (predicted_done < 0) {
        throw InvalidArgument("predicted iterations must be non-negative");
    }
    done_ = predicted_done;
}

double GuessWorker::add_measure(Seconds t, Iterations predicted_done) {
    if (t <= last_report_) {
        throw ClockRegression("measure time must be after the last report");
    }
    if (predicted_done < 0) {
        throw InvalidArgument("predicted iterations must be non-negative");
    }
    const double current_speed = speed();
    if (current_speed == 0.0) {
        return base_measure(t, predicted_done);
    }

    double dev = 0.0;
    if (done_ > predicted_done) {
        if (last_report_ == start_time_) {
            return base_measure(t, predicted_done);
        }
        const double mean_before = static_cast<double>(done_) / (last_report_ - start_time_);
        const double mean_now = static_cast<double>(predicted_done) / (t - start_time_);
        dev = mean_now / mean_before;
    } else {
        const double expected = current_speed * (t - last_report_);
        const double reported = static_cast<double>(predicted_done - done_);
        dev = reported / expected;
    }
    record(t, predicted_done, dev * current_speed);
    return dev;
}

} // namespace ruperlb
