#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "ruperlb/types.hpp"

namespace ruperlb {

inline constexpr Seconds kNever = std::numeric_limits<double>::infinity();

/// Time-varying iteration speed of one simulated thread.
///
/// - constant: base_speed.
/// - step_schedule: base_speed times the multiplier of the latest step whose
///   start is <= t (1 before the first step).
/// - sinusoidal: base_speed * (1 + amplitude * sin(2 pi t / period)).
/// - table: base_speed times a piecewise-linear interpolation of (time,
///   multiplier) points, clamped at both ends.
struct SpeedProfile {
    enum class Kind { Constant, StepSchedule, Sinusoidal, Table };

    Kind kind = Kind::Constant;
    double base_speed = 0.0;
    std::vector<std::pair<Seconds, double>> steps; ///< (from_s, multiplier)
    double amplitude = 0.0;
    Seconds period = 0.0;
    std::vector<std::pair<Seconds, double>> table; ///< (time_s, multiplier)

    static SpeedProfile constant(double speed);
    static SpeedProfile step_schedule(double base, std::vector<std::pair<Seconds, double>> steps);
    static SpeedProfile sinusoidal(double base, double amplitude, Seconds period);
    static SpeedProfile table_of(double base, std::vector<std::pair<Seconds, double>> points);

    /// Throws InvalidArgument unless the profile is well formed and its speed
    /// is non-negative everywhere.
    void validate() const;

    /// Speed at time t (iterations per second).
    double speed(Seconds t) const;

    /// Exact integral of the speed over [t0, t1].
    double integrate(Seconds t0, Seconds t1) const;

    /// First point after t where the speed formula changes piece. Sinusoids
    /// are cut on a 1 s grid. kNever when the last piece extends forever.
    Seconds next_breakpoint(Seconds t) const;

    /// Earliest time t1 >= t0 with integrate(t0, t1) >= amount, or kNever if
    /// that does not happen before `horizon`.
    Seconds time_to_accumulate(Seconds t0, double amount, Seconds horizon = kNever) const;

    friend bool operator==(const SpeedProfile&, const SpeedProfile&) = default;

private:
    double multiplier(Seconds t) const;
    double integrate_piece(Seconds a, Seconds b) const;
    Seconds solve_piece(Seconds a, Seconds b, double amount) const;
};

const char* to_string(SpeedProfile::Kind kind);

/// Whole iterations completed over [t0, t1]. The fractional part is carried
/// in `carry` between successive calls.
Iterations integrate_iterations(const SpeedProfile& profile, Seconds t0, Seconds t1, double& carry);

/// Convenience overload starting from a zero carry.
Iterations integrate_iterations(const SpeedProfile& profile, Seconds t0, Seconds t1);

} // namespace ruperlb
