#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "floodwatch/ids.hpp"
#include "floodwatch/scenario.hpp"

namespace floodwatch {

/// Inbound packets per integer second; absent seconds are zero.
struct CountSeries {
  VehicleId vehicle{};
  std::map<std::int64_t, std::uint32_t> counts;

  std::uint32_t at(std::int64_t t) const {
    auto it = counts.find(t);
    return it == counts.end() ? 0 : it->second;
  }
  std::uint64_t total() const;
};

enum class Label : std::uint8_t { negative = 0, positive = 1 };

struct FeatureRow {
  VehicleId vehicle{};
  std::int64_t t = 0;
  // [Count(t), Count(t-1), ..., Count(t-(a-1))]
  std::vector<double> features;
  Label label = Label::negative;
  bool synthetic = false;

  bool positive() const { return label == Label::positive; }
  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

struct NeighborCounts {
  VehicleId vehicle{};
  TimeWindow interval;
  std::map<VehicleId, std::uint32_t> per_sender;

  std::uint64_t total() const;
};

enum class IntervalMode { normal, alert };

struct IntervalConfig {
  double normal_s = 60;  // monitoring cadence without an attack
  double alert_s = 10;   // cadence after an onset is detected

  double length(IntervalMode mode) const { return mode == IntervalMode::normal ? normal_s : alert_s; }
};

struct WindowOptions {
  std::size_t lags = 10;
  // Off: a row is positive whenever an attack window is in progress and the
  // vehicle is present. On: additionally requires at least one inbound packet
  // from an attacker in that second.
  bool require_attack_traffic = false;
};

/// Whole seconds t whose [t, t+1) overlaps a presence interval.
std::pair<std::int64_t, std::int64_t> presence_seconds(const TimeWindow& presence);

CountSeries build_count_series(std::span<const PacketEvent> events, VehicleId vehicle);

/// One row per second of presence; lags before the vehicle joined read as zero.
std::vector<FeatureRow> windowize(const CountSeries& series, const GroundTruth& truth,
                                  const WindowOptions& options = {});
/// As above with explicit presence and windows; `attack_series` is only read
/// when options.require_attack_traffic is set.
std::vector<FeatureRow> windowize(const CountSeries& series, const TimeWindow& presence,
                                  std::span<const TimeWindow> attack_windows,
                                  const WindowOptions& options = {},
                                  const CountSeries* attack_series = nullptr);

/// Consecutive intervals anchored at the vehicle's first observed inbound second.
std::vector<NeighborCounts> interval_counts(std::span<const PacketEvent> events, VehicleId vehicle,
                                            IntervalMode mode, const IntervalConfig& config = {});

/// Per-sender totals within one interval. `events` must be time-sorted.
NeighborCounts counts_in(std::span<const PacketEvent> events, VehicleId vehicle,
                         const TimeWindow& interval);

/// `t,f0..f{a-1},label[,synthetic]` with one row per line.
void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows,
                       bool with_synthetic_column = false);

}  // namespace floodwatch
