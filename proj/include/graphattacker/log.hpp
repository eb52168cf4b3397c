#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace gat {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Level comes from GRAPHATTACKER_LOG (debug|info|warn|error|off); default warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("GRAPHATTACKER_LOG");
    if (!env) return LogLevel::warn;
    const std::string s(env);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    if (s == "warn") return LogLevel::warn;
    if (s == "error") return LogLevel::error;
    if (s == "off") return LogLevel::off;
    return LogLevel::warn;
  }();
  return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
  if (level < log_level()) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  const char* tag = level == LogLevel::debug  ? "debug"
                    : level == LogLevel::info ? "info"
                    : level == LogLevel::warn ? "warn"
                                              : "error";
  std::cerr << "[graphattacker:" << tag << "] " << msg << '\n';
}

}  // namespace gat
