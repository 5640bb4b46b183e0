#include "lyapnet/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace lyapnet {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Quiet)};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_record(LogLevel level, const nlohmann::json& record) {
  if (static_cast<int>(level) > g_level.load()) return;
  std::string line = record.dump();
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << line << '\n';
}

}  // namespace lyapnet
