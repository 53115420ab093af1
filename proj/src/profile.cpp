#include "ruperlb/profile.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ruperlb {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Iteration counts are truncated with this slack so that exact integrals
// computed in floating point do not lose a whole iteration.
constexpr double kTruncationSlack = 1e-6;

} // namespace

const char* to_string(SpeedProfile::Kind kind) {
    switch (kind) {
    case SpeedProfile::Kind::Constant: return "constant";
    case SpeedProfile::Kind::StepSchedule: return "step_schedule";
    case SpeedProfile::Kind::Sinusoidal: return "sinusoidal";
    case SpeedProfile::Kind::Table: return "table";
    }
    return "unknown";
}

SpeedProfile SpeedProfile::constant(double speed) {
    SpeedProfile p;
    p.kind = Kind::Constant;
    p.base_speed = speed;
    return p;
}

SpeedProfile SpeedProfile::step_schedule(double base, std::vector<std::pair<Seconds, double>> steps) {
    SpeedProfile p;
    p.kind = Kind::StepSchedule;
    p.base_speed = base;
    p.steps = std::move(steps);
    return p;
}

SpeedProfile SpeedProfile::sinusoidal(double base, double amplitude, Seconds period) {
    SpeedProfile p;
    p.kind = Kind::Sinusoidal;
    p.base_speed = base;
    p.amplitude = amplitude;
    p.period = period;
    return p;
}

SpeedProfile SpeedProfile::table_of(double base, std::vector<std::pair<Seconds, double>> points) {
    SpeedProfile p;
    p.kind = Kind::Table;
    p.base_speed = base;
    p.table = std::move(points);
    return p;
}

void SpeedProfile::validate() const {
    if (!(base_speed >= 0.0) || !std::isfinite(base_speed)) {
        throw InvalidArgument("base_speed must be a finite value >= 0");
    }
    switch (kind) {
    case Kind::Constant:
        break;
    case Kind::StepSchedule:
        for (std::size_t i = 0; i < steps.size(); ++i) {
            if (!(steps[i].second >= 0.0)) {
                throw InvalidArgument("step multipliers must be >= 0");
            }
            if (i > 0 && !(steps[i].first > steps[i - 1].first)) {
                throw InvalidArgument("step times must be strictly increasing");
            }
        }
        break;
    case Kind::Sinusoidal:
        if (!(period > 0.0)) {
            throw InvalidArgument("sinusoidal period must be > 0");
        }
        if (!(amplitude >= 0.0 && amplitude <= 1.0)) {
            throw InvalidArgument("sinusoidal amplitude must be in [0,1]");
        }
        break;
    case Kind::Table:
        if (table.empty()) {
            throw InvalidArgument("table profile needs at least one point");
        }
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (!(table[i].second >= 0.0)) {
                throw InvalidArgument("table multipliers must be >= 0");
            }
            if (i > 0 && !(table[i].first > table[i - 1].first)) {
                throw InvalidArgument("table times must be strictly increasing");
            }
        }
        break;
    }
}

double SpeedProfile::multiplier(Seconds t) const {
    switch (kind) {
    case Kind::Constant:
        return 1.0;
    case Kind::StepSchedule: {
        double m = 1.0;
        for (const auto& [from, mult] : steps) {
            if (from <= t) {
                m = mult;
            } else {
                break;
            }
        }
        return m;
    }
    case Kind::Sinusoidal:
        return 1.0 + amplitude * std::sin(kTwoPi * t / period);
    case Kind::Table: {
        if (t <= table.front().first) {
            return table.front().second;
        }
        if (t >= table.back().first) {
            return table.back().second;
        }
        const auto hi = std::upper_bound(table.begin(), table.end(), t,
                                         [](Seconds x, const auto& p) { return x < p.first; });
        const auto lo = hi - 1;
        const double f = (t - lo->first) / (hi->first - lo->first);
        return lo->second + f * (hi->second - lo->second);
    }
    }
    return 1.0;
}

double SpeedProfile::speed(Seconds t) const {
    return base_speed * multiplier(t);
}

Seconds SpeedProfile::next_breakpoint(Seconds t) const {
    switch (kind) {
    case Kind::Constant:
        return kNever;
    case Kind::StepSchedule:
        for (const auto& [from, mult] : steps) {
            if (from > t) {
                return from;
            }
        }
        return kNever;
    case Kind::Sinusoidal:
        return std::floor(t) + 1.0;
    case Kind::Table:
        for (const auto& [time, mult] : table) {
            if (time > t) {
                return time;
            }
        }
        return kNever;
    }
    return kNever;
}

// Integral over [a, b] where [a, b] lies within one piece.
double SpeedProfile::integrate_piece(Seconds a, Seconds b) const {
    if (b <= a) {
        return 0.0;
    }
    switch (kind) {
    case Kind::Sinusoidal: {
        const double w = kTwoPi / period;
        return base_speed * ((b - a) + amplitude * (std::cos(w * a) - std::cos(w * b)) / w);
    }
    case Kind::Table:
        return 0.5 * (speed(a) + speed(b)) * (b - a);
    default:
        return speed(a) * (b - a);
    }
}

double SpeedProfile::integrate(Seconds t0, Seconds t1) const {
    if (t1 < t0) {
        throw InvalidArgument("integration bounds out of order");
    }
    if (kind == Kind::Sinusoidal) {
        return integrate_piece(t0, t1);
    }
    double total = 0.0;
    Seconds a = t0;
    while (a < t1) {
        const Seconds b = std::min(next_breakpoint(a), t1);
        total += integrate_piece(a, b);
        a = b;
    }
    return total;
}

// Time x in [a, b] with integral over [a, x] equal to amount (which is known
// to be within the piece's total).
Seconds SpeedProfile::solve_piece(Seconds a, Seconds b, double amount) const {
    if (amount <= 0.0) {
        return a;
    }
    switch (kind) {
    case Kind::Table: {
        const double v0 = speed(a);
        if (std::isinf(b)) {
            return v0 > 0.0 ? a + amount / v0 : kNever;
        }
        const double slope = (speed(b) - v0) / (b - a);
        const double disc = std::max(0.0, v0 * v0 + 2.0 * slope * amount);
        const double denom = v0 + std::sqrt(disc);
        const Seconds x = denom > 0.0 ? 2.0 * amount / denom : b;
        return std::min(a + x, b);
    }
    case Kind::Sinusoidal: {
        Seconds lo = a;
        Seconds hi = b;
        for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
            const Seconds mid = 0.5 * (lo + hi);
            (integrate_piece(a, mid) < amount ? lo : hi) = mid;
        }
        return hi;
    }
    default: {
        const double v = speed(a);
        if (v <= 0.0) {
            return kNever;
        }
        return std::min(a + amount / v, b);
    }
    }
}

Seconds SpeedProfile::time_to_accumulate(Seconds t0, double amount, Seconds horizon) const {
    if (amount <= 0.0) {
        return t0;
    }
    if (base_speed <= 0.0) {
        return kNever;
    }
    Seconds a = t0;
    double left = amount;
    while (a < horizon) {
        const Seconds b = next_breakpoint(a);
        if (std::isinf(b)) {
            const Seconds t = solve_piece(a, b, left);
            return t <= horizon ? t : kNever;
        }
        const double piece = integrate_piece(a, b);
        if (piece >= left) {
            const Seconds t = solve_piece(a, b, left);
            return t <= horizon ? t : kNever;
        }
        left -= piece;
        a = b;
    }
    return kNever;
}

Iterations integrate_iterations(const SpeedProfile& profile, Seconds t0, Seconds t1, double& carry) {
    const double total = carry + profile.integrate(t0, t1);
    const auto whole = static_cast<Iterations>(std::floor(total + kTruncationSlack));
    carry = std::max(0.0, total - static_cast<double>(whole));
    return whole;
}

Iterations integrate_iterations(const SpeedProfile& profile, Seconds t0, Seconds t1) {
    double carry = 0.0;
    return integrate_iterations(profile, t0, t1, carry);
}

} // namespace ruperlb
