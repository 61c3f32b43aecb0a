#pragma once

#include <cstdarg>
#include <string>

namespace san {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Level comes from SAN_LOG_LEVEL (error|info|debug) unless overridden.
LogLevel log_level();
void set_log_level(LogLevel level);

// printf-style formatting into a std::string.
std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace san
