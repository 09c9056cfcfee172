#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/preprocess.hpp"

namespace floodwatch {

struct BalanceConfig {
  // normal / malicious after augmentation; the default is the lowest
  // per-city training ratio observed in the reference VANET datasets.
  double target_ratio = 294.12;
  std::uint32_t k_neighbors = 5;

  void validate() const;
};

struct SmoteResult {
  std::vector<FeatureRow> rows;  // originals first, synthetics appended
  std::size_t synthetic_count = 0;
  std::optional<std::string> warning;
};

/// Number of synthetic minority rows so that majority / minority <= target.
std::size_t synthetic_needed(std::size_t majority, std::size_t minority, double target_ratio);

/// x + lambda * (neighbor - x), component-wise.
std::vector<double> interpolate(std::span<const double> x, std::span<const double> neighbor,
                                double lambda);

/// SMOTE over the positive (attack) class. Deterministic for a fixed seed.
SmoteResult smote(std::span<const FeatureRow> rows, const BalanceConfig& config,
                  std::uint64_t seed);

void to_json(nlohmann::json& j, const BalanceConfig& c);
void from_json(const nlohmann::json& j, BalanceConfig& c);

}  // namespace floodwatch
