#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/ids.hpp"

namespace floodwatch {

struct ScenarioConfig {
  std::int64_t duration_s = 3600;
  std::uint32_t total_vehicles = 360;
  std::pair<std::uint32_t, std::uint32_t> concurrent_range{10, 30};
  double arrival_interval_s = 9.5;
  double attacker_fraction = 0.05;
  std::uint32_t attack_count = 6;
  double attack_spacing_s = 600;
  double attack_duration_s = 25;
  // Start of the first attack window; defaults to attack_spacing_s when unset.
  std::optional<double> first_attack_s;
  double normal_rate_pps = 1.0;
  double flood_rate_pps = 100.0;
  // Mean neighbour count. Values >= concurrent max give a fully connected cell.
  double neighbor_degree = 29;
  std::uint64_t rng_seed = 42;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

struct PacketEvent {
  double time_s = 0;
  VehicleId sender{};
  VehicleId receiver{};

  friend bool operator==(const PacketEvent&, const PacketEvent&) = default;
};

struct TimeWindow {
  double start_s = 0;
  double end_s = 0;

  bool contains(double t) const { return t >= start_s && t < end_s; }
  double length() const { return end_s - start_s; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct GroundTruth {
  std::set<VehicleId> attackers;
  std::vector<TimeWindow> attack_windows;
  std::map<VehicleId, TimeWindow> presence;

  bool is_attacker(VehicleId v) const { return attackers.contains(v); }
  bool in_attack(double t) const;
  /// Presence lookup; nullopt for unknown vehicles.
  std::optional<TimeWindow> presence_of(VehicleId v) const;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Scenario {
  std::vector<PacketEvent> events;  // sorted by time
  std::optional<GroundTruth> truth;
};

/// Synthetic VANET stream: staggered arrivals, degree-targeted random
/// neighbour graph re-drawn on every join/leave, Poisson emissions per
/// directed neighbour pair, attackers flooding inside attack windows.
Scenario generate(const ScenarioConfig& config);

/// Reads the event-log CSV. Ground truth is reconstructed only when the
/// annotation columns are present (attackers and windows, presence from the
/// observed span of each vehicle).
Scenario ingest(const std::filesystem::path& path);

void write_event_log(const std::filesystem::path& path, std::span<const PacketEvent> events,
                     const GroundTruth* truth = nullptr);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const GroundTruth& truth);
void from_json(const nlohmann::json& j, GroundTruth& truth);
void to_json(nlohmann::json& j, const ScenarioConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ScenarioConfig& config);

/// Attack windows implied by a config (start = first + k * spacing, end capped at duration).
std::vector<TimeWindow> attack_schedule(const ScenarioConfig& config);

/// Groups events by receiver, preserving time order.
std::map<VehicleId, std::vector<PacketEvent>> partition_by_receiver(
    std::span<const PacketEvent> events);

}  // namespace floodwatch
