#include "robustutil/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace robustutil::log {
namespace {

spdlog::level::level_enum level_from_env() {
    const char* raw = std::getenv("ROBUSTUTIL_LOG");
    if (raw == nullptr) return spdlog::level::warn;
    const std::string v(raw);
    if (v == "error") return spdlog::level::err;
    if (v == "info") return spdlog::level::info;
    if (v == "debug") return spdlog::level::debug;
    return spdlog::level::warn;
}

spdlog::logger& logger() {
    static const std::shared_ptr<spdlog::logger> instance = [] {
        auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
        auto lg = std::make_shared<spdlog::logger>("robustutil", sink);
        lg->set_pattern("[%l] %v");
        lg->set_level(level_from_env());
        return lg;
    }();
    return *instance;
}

}  // namespace

void error(std::string_view message) { logger().error("{}", message); }
void warn(std::string_view message) { logger().warn("{}", message); }
void info(std::string_view message) { logger().info("{}", message); }
void debug(std::string_view message) { logger().debug("{}", message); }

}  // namespace robustutil::log
