#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace arraydiar {

/// Every recoverable failure in the library surfaces as this exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {

inline Level& threshold() {
  static Level level = Level::kWarn;
  return level;
}

inline Sink& sink() {
  static Sink s = [](Level lvl, const std::string& msg) {
    static constexpr const char* kNames[] = {"debug", "info", "warn", "error", "off"};
    std::fprintf(stderr, "[%s] %s\n", kNames[static_cast<int>(lvl)], msg.c_str());
  };
  return s;
}

}  // namespace detail

inline void set_level(Level level) { detail::threshold() = level; }
inline Level level() { return detail::threshold(); }

/// Replaces the sink; returns the previous one so tests can restore it.
inline Sink set_sink(Sink s) { return std::exchange(detail::sink(), std::move(s)); }

inline void write(Level lvl, const std::string& msg) {
  if (lvl >= detail::threshold() && detail::sink()) detail::sink()(lvl, msg);
}

inline void debug(const std::string& msg) { write(Level::kDebug, msg); }
inline void info(const std::string& msg) { write(Level::kInfo, msg); }
inline void warn(const std::string& msg) { write(Level::kWarn, msg); }

}  // namespace log

/// Rounds seconds to the nearest millisecond, the resolution of every
/// serialized time value.
inline double quantize_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

inline long long to_ms(double seconds) { return std::llround(seconds * 1000.0); }

inline constexpr double kPi = 3.14159265358979323846;

inline double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

}  // namespace arraydiar
