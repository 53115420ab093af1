#pragma once

// Brute-force reference for the redistribution arithmetic. It never touches
// the library's Worker/Task/Coordinator classes: every quantity is recomputed
// from the raw (time, count) traces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

struct Sample {
    double t;
    std::int64_t count;
};

/// A thread worker rebuilt from its start time and reports.
struct ThreadTrace {
    double start = 0.0;
    std::vector<Sample> reports;
    bool finished = false;

    std::int64_t done() const { return reports.empty() ? 0 : reports.back().count; }
    double last_time() const { return reports.empty() ? start : reports.back().t; }

    std::vector<double> speeds() const {
        std::vector<double> out;
        double t_prev = start;
        std::int64_t d_prev = 0;
        for (const auto& r : reports) {
            out.push_back(static_cast<double>(r.count - d_prev) / (r.t - t_prev));
            t_prev = r.t;
            d_prev = r.count;
        }
        return out;
    }

    double speed() const {
        const auto s = speeds();
        return s.empty() ? 0.0 : s.back();
    }
};

/// A guess worker rebuilt from its start time and predicted totals.
struct GuessTrace {
    double start = 0.0;
    std::vector<Sample> reports;
    bool finished = false;

    // Replays the prediction-based speed estimate report by report.
    void replay(double& speed, std::int64_t& done, double& t_last) const {
        speed = 0.0;
        done = 0;
        t_last = start;
        for (const auto& r : reports) {
            const double dt = r.t - t_last;
            bool plain = speed == 0.0;
            double next = 0.0;
            if (!plain && done > r.count) {
                if (t_last == start) {
                    plain = true;
                } else {
                    const double mean_then = static_cast<double>(done) / (t_last - start);
                    const double mean_now = static_cast<double>(r.count) / (r.t - start);
                    next = (mean_now / mean_then) * speed;
                }
            } else if (!plain) {
                const double expected = speed * dt;
                const double real = static_cast<double>(r.count - done);
                next = (real / expected) * speed;
            }
            if (plain) {
                next = std::max(0.0, static_cast<double>(r.count - done) / dt);
            }
            speed = next;
            done = r.count;
            t_last = r.t;
        }
    }
};

/// What a worker looks like to the checkpoint.
struct View {
    bool working = true;
    std::int64_t done = 0;
    double speed = 0.0;
    double last_time = 0.0;
    std::int64_t assigned = 0;
};

inline View view_of(const ThreadTrace& w, std::int64_t assigned) {
    return {!w.finished, w.done(), w.speed(), w.last_time(), assigned};
}

inline View view_of(const GuessTrace& g, std::int64_t assigned) {
    View v;
    v.working = !g.finished;
    g.replay(v.speed, v.done, v.last_time);
    v.assigned = assigned;
    return v;
}

enum class Outcome { ForceFinish, Redistributed, BelowThreshold, NoSpeed };

struct Checkpoint {
    Outcome outcome;
    std::vector<std::int64_t> assigned;
};

/// Proportional split of the remaining iterations, as specified: floor every
/// share, then hand the leftover out one by one from the fastest worker down
/// (lowest index first among equals).
/// With `always` set the remaining-time threshold is ignored and, when no
/// speed is known, the remainder is split evenly (extra iterations to the
/// lowest indices).
inline Checkpoint checkpoint(const std::vector<View>& ws, std::int64_t budget, double t, double t_min,
                             bool always = false) {
    Checkpoint out;
    for (const auto& w : ws) {
        out.assigned.push_back(w.assigned);
    }
    std::int64_t total_done = 0;
    double total_speed = 0.0;
    double predicted = 0.0;
    for (const auto& w : ws) {
        total_done += w.done;
        if (w.working) {
            total_speed += w.speed;
            predicted += static_cast<double>(w.done) + w.speed * (t - w.last_time);
        } else {
            predicted += static_cast<double>(w.done);
        }
    }
    if (budget <= total_done) {
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (ws[i].working) {
                out.assigned[i] = ws[i].done;
            }
        }
        out.outcome = Outcome::ForceFinish;
        return out;
    }
    const std::int64_t remaining = budget - total_done;
    if (total_speed <= 0.0) {
        if (!always) {
            out.outcome = Outcome::NoSpeed;
            return out;
        }
        std::vector<std::size_t> working;
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (ws[i].working) {
                working.push_back(i);
            }
        }
        if (!working.empty()) {
            const auto n = static_cast<std::int64_t>(working.size());
            for (std::size_t k = 0; k < working.size(); ++k) {
                const auto extra = static_cast<std::int64_t>(k) < remaining % n ? 1 : 0;
                out.assigned[working[k]] = ws[working[k]].done + remaining / n + extra;
            }
        }
        out.outcome = Outcome::Redistributed;
        return out;
    }
    const double remaining_time = (static_cast<double>(budget) - predicted) / total_speed;
    if (!always && remaining_time <= t_min) {
        out.outcome = Outcome::BelowThreshold;
        return out;
    }
    std::int64_t handed = 0;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (!ws[i].working) {
            continue;
        }
        const auto share = static_cast<std::int64_t>(
            std::floor(ws[i].speed / total_speed * static_cast<double>(remaining)));
        out.assigned[i] = ws[i].done + share;
        handed += share;
        order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ws[a].speed != ws[b].speed ? ws[a].speed > ws[b].speed : a < b;
    });
    for (std::size_t k = 0; handed < remaining; ++k, ++handed) {
        ++out.assigned[order[k % order.size()]];
    }
    out.outcome = Outcome::Redistributed;
    return out;
}

/// True when the assignments (done for stopped workers) no longer add up to
/// the budget.
inline bool unbalanced(const std::vector<View>& ws, std::int64_t budget) {
    std::int64_t total = 0;
    for (const auto& w : ws) {
        total += w.working ? w.assigned : w.done;
    }
    return total != budget;
}

/// Report interval suggestion recomputed from the elapsed time and the speed
/// ratio.
inline double next_interval(double elapsed, double ratio, double ds_max, double dt_pc) {
    const double dev = std::abs(ratio - 1.0);
    double dt = elapsed;
    if (dev > ds_max) {
        dt *= std::max(1.0 - (dev - ds_max), 0.8);
    } else if (dev < 0.1 * ds_max) {
        dt *= std::min(1.0 + (0.5 * ds_max - dev), 1.2);
    }
    return dt > dt_pc ? 0.8 * dt_pc : dt;
}

} // namespace oracle
