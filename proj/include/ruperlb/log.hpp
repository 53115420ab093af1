#pragma once

#include <string_view>

namespace ruperlb {

/// Sets the global log level from RUPERLB_LOG (error, info or debug; default
/// error). Unknown values fall back to the default and return false.
bool configure_logging_from_env();

/// Same, from an explicit value.
bool configure_logging(std::string_view level);

} // namespace ruperlb
