#pragma once

#include <atomic>
#include <chrono>

#include "ruperlb/types.hpp"

namespace ruperlb {

/// Monotonic time source. Implementations must never go backwards.
class Clock {
public:
    virtual ~Clock() = default;
    virtual Seconds now() const = 0;
};

/// Wall clock backed by std::chrono::steady_clock. On Linux the epoch is
/// shared by all processes of a host.
class SteadyClock final : public Clock {
public:
    Seconds now() const override {
        using namespace std::chrono;
        return duration<double>(steady_clock::now().time_since_epoch()).count();
    }
};

/// Virtual clock advanced explicitly; used by the simulator and by tests.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Seconds start = 0.0) : now_(start) {}

    Seconds now() const override { return now_.load(std::memory_order_acquire); }

    /// Moves the clock to t. Throws ClockRegression if t is in the past.
    void set(Seconds t) {
        if (t < now()) {
            throw ClockRegression("manual clock cannot move backwards");
        }
        now_.store(t, std::memory_order_release);
    }

    void advance(Seconds dt) { set(now() + dt); }

private:
    std::atomic<Seconds> now_;
};

} // namespace ruperlb
