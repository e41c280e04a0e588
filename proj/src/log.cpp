#include "relux/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace relux::log {

namespace {

std::shared_ptr<spdlog::logger> logger() {
    static auto instance = [] {
        auto l = spdlog::stderr_color_mt("relux");
        l->set_pattern("[%H:%M:%S.%e] [%l] %v");
        l->set_level(spdlog::level::warn);
        return l;
    }();
    return instance;
}

}  // namespace

void init_from_env() {
    const char* env = std::getenv("RELUX_LOG");
    if (env == nullptr) return;
    logger()->set_level(spdlog::level::from_str(env));
}

void debug(std::string_view msg) { logger()->debug(msg); }
void info(std::string_view msg) { logger()->info(msg); }
void warn(std::string_view msg) { logger()->warn(msg); }
void error(std::string_view msg) { logger()->error(msg); }

}  // namespace relux::log
