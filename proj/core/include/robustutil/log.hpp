#pragma once

#include <string_view>

namespace robustutil::log {

// Level is read once from ROBUSTUTIL_LOG (error|warn|info|debug); default warn.
void error(std::string_view message);
void warn(std::string_view message);
void info(std::string_view message);
void debug(std::string_view message);

}  // namespace robustutil::log
