#include "ruperlb/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace ruperlb {

bool configure_logging(std::string_view level) {
    static const bool once = [] {
        auto logger = spdlog::stderr_color_mt("ruperlb");
        spdlog::set_default_logger(logger);
        spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
        return true;
    }();
    (void)once;
    if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else {
        spdlog::set_level(spdlog::level::err);
        return level.empty() || level == "error";
    }
    return true;
}

bool configure_logging_from_env() {
    const char* env = std::getenv("RUPERLB_LOG");
    return configure_logging(env ? env : "");
}

} // namespace ruperlb
