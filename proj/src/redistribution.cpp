#include "ruperlb/redistribution.hpp"

namespace ruperlb {

void BalanceParams::validate() const {
    if (!(checkpoint_interval > 0.0)) {
        throw InvalidArgument("checkpoint_interval_s must be > 0");
    }
    if (!(remaining_time_threshold > 0.0)) {
        throw InvalidArgument("remaining_time_threshold_s must be > 0");
    }
    if (!(max_speed_deviation > 0.0 && max_speed_deviation < 1.0)) {
        throw InvalidArgument("max_speed_deviation must be in (0,1)");
    }
}

Seconds adjust_report_interval(Seconds elapsed, double deviation, const BalanceParams& params) {
    const double ds_max = params.max_speed_deviation;
    Seconds dt = elapsed;
    if (deviation > ds_max) {
        dt *= std::max(1.0 - (deviation - ds_max), 0.8);
    } else if (deviation < 0.1 * ds_max) {
        dt *= std::min(1.0 + (0.5 * ds_max - deviation), 1.2);
    }
    if (dt > params.checkpoint_interval) {
        dt = 0.8 * params.checkpoint_interval;
    }
    return dt;
}

const char* to_string(RedistributionOutcome outcome) {
    switch (outcome) {
    case RedistributionOutcome::ForceFinish: return "force_finish";
    case RedistributionOutcome::Redistributed: return "redistributed";
    case RedistributionOutcome::BelowThreshold: return "below_threshold";
    case RedistributionOutcome::NoSpeed: return "no_speed";
    }
    return "unknown";
}

} // namespace ruperlb
