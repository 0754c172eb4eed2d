#pragma once

#include <sstream>
#include <string>

namespace wmg::log {

enum class Level { quiet = 0, info = 1, debug = 2 };

/// Reads WMG_LOG={quiet,info,debug}; unset or unknown means info.
Level level_from_env();
void set_level(Level level);
Level level();

void write(Level lvl, const std::string& message);

template <class... Args>
void info(const Args&... args) {
  if (level() < Level::info) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::info, os.str());
}

template <class... Args>
void debug(const Args&... args) {
  if (level() < Level::debug) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::debug, os.str());
}

/// Warnings are shown unless the level is quiet.
template <class... Args>
void warn(const Args&... args) {
  if (level() < Level::info) return;
  std::ostringstream os;
  os << "warning: ";
  (os << ... << args);
  write(Level::info, os.str());
}

}  // namespace wmg::log
