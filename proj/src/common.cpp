#include "noxpred/common.hpp"

#include <atomic>

namespace noxpred {

namespace {
std::atomic<LogLevel> g_level{LogLevel::warn};

const char* level_tag(LogLevel level) {
    switch (level) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        case LogLevel::debug: return "debug";
    }
    return "?";
}
}  // namespace

LogLevel log_level() { return g_level.load(std::memory_order_relaxed); }

void set_log_level(LogLevel level) { g_level.store(level, std::memory_order_relaxed); }

bool set_log_level(const std::string& name) {
    if (name == "error") set_log_level(LogLevel::error);
    else if (name == "warn") set_log_level(LogLevel::warn);
    else if (name == "info") set_log_level(LogLevel::info);
    else if (name == "debug") set_log_level(LogLevel::debug);
    else return false;
    return true;
}

namespace detail {
void log_line(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::fprintf(stderr, "[%s] %s\n", level_tag(level), msg.c_str());
}
}  // namespace detail

}  // namespace noxpred
