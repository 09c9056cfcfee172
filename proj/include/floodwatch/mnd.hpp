#pragma once

#include <set>
#include <span>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/ids.hpp"
#include "floodwatch/preprocess.hpp"
#include "floodwatch/scenario.hpp"

namespace floodwatch {

struct MadParams {
  double b = 1.4826;  // consistency constant for normally distributed data
  double ce = 3.0;

  void validate() const;
};

struct MadStats {
  double median = 0;
  double mad = 0;
  double upper_tr = 0;

  friend bool operator==(const MadStats&, const MadStats&) = default;
};

struct SuspicionReport {
  VehicleId reporter{};
  TimeWindow interval;
  std::set<VehicleId> suspected;
  MadStats stats;

  friend bool operator==(const SuspicionReport&, const SuspicionReport&) = default;
};

/// Even lengths average the two central order statistics. Throws DomainError when empty.
double median(std::span<const double> values);
double mad(std::span<const double> values, double b = 1.4826);
/// (M - ce*MAD, M + ce*MAD)
std::pair<double, double> rejection_bounds(std::span<const double> values,
                                           const MadParams& params = {});

/// Flags senders whose count is strictly above the upper bound. Fewer than
/// two neighbours yields no suspects.
SuspicionReport detect(const NeighborCounts& counts, const MadParams& params = {});

void to_json(nlohmann::json& j, const SuspicionReport& r);
void from_json(const nlohmann::json& j, SuspicionReport& r);
void to_json(nlohmann::json& j, const MadParams& p);
void from_json(const nlohmann::json& j, MadParams& p);

}  // namespace floodwatch
