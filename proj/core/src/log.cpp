#include "san/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace san {

namespace {

LogLevel parse_env_level() {
    const char* env = std::getenv("SAN_LOG_LEVEL");
    if (!env) return LogLevel::info;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::info;
}

LogLevel& level_ref() {
    static LogLevel level = parse_env_level();
    return level;
}

void emit(const char* tag, const std::string& msg) {
    std::fprintf(stderr, "[san] %s: %s\n", tag, msg.c_str());
}

}  // namespace

LogLevel log_level() { return level_ref(); }
void set_log_level(LogLevel level) { level_ref() = level; }

std::string strf(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    va_list ap2;
    va_copy(ap2, ap);
    int n = std::vsnprintf(nullptr, 0, fmt, ap);
    va_end(ap);
    std::string out;
    if (n > 0) {
        out.resize(static_cast<std::size_t>(n));
        std::vsnprintf(out.data(), out.size() + 1, fmt, ap2);
    }
    va_end(ap2);
    return out;
}

void log_error(const std::string& msg) {
    emit("error", msg);
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) emit("info", msg);
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) emit("debug", msg);
}

}  // namespace san
