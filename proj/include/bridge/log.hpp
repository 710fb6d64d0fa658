#pragma once

#include <spdlog/spdlog.h>

#include <memory>

namespace bridge {

/// Shared "bridge" logger; tests attach extra sinks to inspect output.
std::shared_ptr<spdlog::logger> log();

}  // namespace bridge
