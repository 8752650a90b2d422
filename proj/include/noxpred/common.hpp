#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace noxpred {

// Config/usage problems (bad schema, bad JSON, invalid parameter ranges).
// The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failures inside an otherwise valid pipeline (fit failure, empty sample
// set, I/O). The CLI maps these to exit code 3.
class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level();
void set_log_level(LogLevel level);
bool set_log_level(const std::string& name);  // "error"|"warn"|"info"|"debug"

namespace detail {
void log_line(LogLevel level, const std::string& msg);
}

inline void log_error(const std::string& msg) { detail::log_line(LogLevel::error, msg); }
inline void log_warn(const std::string& msg) { detail::log_line(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { detail::log_line(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { detail::log_line(LogLevel::debug, msg); }

}  // namespace noxpred
