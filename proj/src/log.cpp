#include "wmg/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace wmg::log {

namespace {
std::atomic<int> g_level{static_cast<int>(level_from_env())};
std::mutex g_mutex;
}  // namespace

Level level_from_env() {
  const char* env = std::getenv("WMG_LOG");
  if (env == nullptr) return Level::info;
  const std::string_view v(env);
  if (v == "quiet") return Level::quiet;
  if (v == "debug") return Level::debug;
  return Level::info;
}

void set_level(Level lvl) { g_level = static_cast<int>(lvl); }

Level level() { return static_cast<Level>(g_level.load()); }

void write(Level, const std::string& message) {
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[wmg] " << message << '\n';
}

}  // namespace wmg::log
