#include "bridge/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>

namespace bridge {

std::shared_ptr<spdlog::logger> log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("bridge");
    l->set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ [%n] %v");
    if (const char* level = std::getenv("BRIDGE_LOG_LEVEL")) {
      l->set_level(spdlog::level::from_str(level));
    } else {
      l->set_level(spdlog::level::info);
    }
    return l;
  }();
  return logger;
}

}  // namespace bridge
