#pragma once

#include <nlohmann/json.hpp>

namespace lyapnet {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes `record` as one JSON line on stderr when `level` is enabled. Thread-safe.
void log_record(LogLevel level, const nlohmann::json& record);

}  // namespace lyapnet
