#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace floodwatch {

/// Library logger. Level comes from FLOODWATCH_LOG (trace|debug|info|warn|error|off),
/// default warn. Output goes to stderr.
std::shared_ptr<spdlog::logger> logger();

}  // namespace floodwatch
