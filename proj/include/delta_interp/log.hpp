#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

// Minimal stderr logger. Level comes from DELTA_INTERP_LOG (error|info|debug),
// default info.
namespace delta_interp::log {

enum class Level { error = 0, info = 1, debug = 2 };

inline Level level_from_env() {
  const char* v = std::getenv("DELTA_INTERP_LOG");
  if (!v) return Level::info;
  const std::string_view s(v);
  if (s == "error") return Level::error;
  if (s == "debug") return Level::debug;
  return Level::info;
}

inline Level& current_level() {
  static Level level = level_from_env();
  return level;
}

inline void set_level(Level l) { current_level() = l; }

inline void write(Level l, std::string_view tag, std::string_view msg) {
  if (static_cast<int>(l) > static_cast<int>(current_level())) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[" << tag << "] " << msg << '\n';
}

inline void error(std::string_view msg) { write(Level::error, "error", msg); }
inline void warn(std::string_view msg) { write(Level::info, "warn", msg); }
inline void info(std::string_view msg) { write(Level::info, "info", msg); }
inline void debug(std::string_view msg) { write(Level::debug, "debug", msg); }

}  // namespace delta_interp::log
