#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/ids.hpp"
#include "floodwatch/mnd.hpp"
#include "floodwatch/protocol.hpp"

namespace floodwatch {

enum class ListMode { stateless, stateful };

std::string_view to_string(ListMode mode);
ListMode list_mode_from(std::string_view name);

struct Aggregation {
  std::set<VehicleId> listed;
  std::map<VehicleId, std::uint32_t> frequencies;  // distinct reporters per suspect
  std::vector<std::string> warnings;
};

/// F_i counts distinct reporters naming i; ids with F_i >= th are listed.
/// Self-reports are dropped with a warning.
Aggregation aggregate(std::span<const SuspicionReport> reports, std::uint32_t th);

struct AggregationState {
  ListMode mode = ListMode::stateless;
  std::uint32_t th = 1;
  double timer_duration_s = 120;
  std::map<VehicleId, std::uint32_t> frequencies;
  std::set<VehicleId> list;
  std::map<VehicleId, double> timers;  // expiry time; stateful only

  void validate() const;
};

/// Stateless: the broadcast is exactly `fresh`. Stateful: fresh ids get
/// their timer reset to now + duration, expired ids are dropped.
std::pair<AggregationState, std::set<VehicleId>> update_list(AggregationState state,
                                                             const std::set<VehicleId>& fresh,
                                                             double now_s);

struct MaliciousList {
  std::uint64_t version = 0;
  std::set<VehicleId> ids;
  ListMode mode = ListMode::stateless;
  double issued_at_s = 0;

  Message to_message() const;
  static MaliciousList from_message(const Message& m);
  friend bool operator==(const MaliciousList&, const MaliciousList&) = default;
};

/// {"type":"MALICIOUS_LIST","version","ids","mode","issued_at_s"}
void to_json(nlohmann::json& j, const MaliciousList& list);
void from_json(const nlohmann::json& j, MaliciousList& list);

/// A vehicle's local view of the broadcast list.
class Blocklist {
 public:
  void replace(const MaliciousList& list);
  bool blocks(VehicleId sender) const { return ids_.contains(sender); }
  /// Returns true (and counts it) when the packet is dropped.
  bool filter(VehicleId sender);
  std::uint64_t blocked() const { return blocked_; }
  std::uint64_t version() const { return version_; }
  const std::set<VehicleId>& ids() const { return ids_; }

 private:
  std::set<VehicleId> ids_;
  std::uint64_t version_ = 0;
  std::uint64_t blocked_ = 0;
};

/// Server side of malicious-node detection: buffers reports for one
/// aggregation window, then aggregates and issues the next list.
class MndServer {
 public:
  explicit MndServer(AggregationState state);

  void submit(const SuspicionReport& report) { pending_.push_back(report); }
  void submit(const Message& message);
  /// Aggregates everything submitted since the last tick.
  MaliciousList tick(double now_s);

  /// Cold start: a joining vehicle gets the latest list.
  const MaliciousList& current() const { return current_; }
  const AggregationState& state() const { return state_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  AggregationState state_;
  std::vector<SuspicionReport> pending_;
  MaliciousList current_;
  std::vector<std::string> warnings_;
};

/// Replaces every blocklist with the broadcast set.
void broadcast(const MaliciousList& list, std::map<VehicleId, Blocklist>& vehicles);

}  // namespace floodwatch
