#include "floodwatch/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace floodwatch {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto lg = spdlog::stderr_color_mt("floodwatch");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("FLOODWATCH_LOG")) {
      level = spdlog::level::from_str(env);
    }
    lg->set_level(level);
    return lg;
  }();
  return instance;
}

}  // namespace floodwatch
