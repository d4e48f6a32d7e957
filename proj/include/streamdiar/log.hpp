// Copyright 2026 The streamdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Minimal stderr logging. The level comes from STREAMDIAR_LOG_LEVEL
// (error, warn, info, debug); default is warn.

#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace streamdiar {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* v = std::getenv("STREAMDIAR_LOG_LEVEL");
    if (v == nullptr) return LogLevel::kWarn;
    const std::string s(v);
    if (s == "error") return LogLevel::kError;
    if (s == "info") return LogLevel::kInfo;
    if (s == "debug") return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

namespace log_detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
}  // namespace log_detail

template <typename... Args>
void log_at(LogLevel level, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static constexpr const char* kNames[] = {"ERROR", "WARN", "INFO", "DEBUG"};
  std::ostringstream os;
  os << "[" << kNames[static_cast<int>(level)] << "] ";
  (os << ... << args);
  std::lock_guard<std::mutex> lock(log_detail::mutex());
  std::cerr << os.str() << '\n';
}

#define SD_LOG_INFO(...) ::streamdiar::log_at(::streamdiar::LogLevel::kInfo, __VA_ARGS__)
#define SD_LOG_DEBUG(...) ::streamdiar::log_at(::streamdiar::LogLevel::kDebug, __VA_ARGS__)
#define SD_LOG_WARN(...) ::streamdiar::log_at(::streamdiar::LogLevel::kWarn, __VA_ARGS__)

}  // namespace streamdiar
