#include "floodwatch/fed_mnd.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/log.hpp"

namespace floodwatch {

std::string_view to_string(ListMode mode) {
  return mode == ListMode::stateless ? "stateless" : "stateful";
}

ListMode list_mode_from(std::string_view name) {
  if (name == "stateless") return ListMode::stateless;
  if (name == "stateful") return ListMode::stateful;
  throw ConfigError("unknown list mode '" + std::string(name) + "'");
}

Aggregation aggregate(std::span<const SuspicionReport> reports, std::uint32_t th) {
  if (th < 1) throw ConfigError("fed-mnd: TH must be >= 1");
  Aggregation out;
  std::map<VehicleId, std::set<VehicleId>> reporters;
  for (const auto& r : reports) {
    for (auto id : r.suspected) {
      if (id == r.reporter) {
        out.warnings.push_back(to_string(r.reporter) + " reported itself; ignored");
        continue;
      }
      reporters[id].insert(r.reporter);
    }
  }
  for (const auto& [id, who] : reporters) {
    const auto f = static_cast<std::uint32_t>(who.size());
    out.frequencies[id] = f;
    if (f >= th) out.listed.insert(id);
  }
  return out;
}

void AggregationState::validate() const {
  if (th < 1) throw ConfigError("fed-mnd: TH must be >= 1");
  if (!(timer_duration_s >= 0)) throw ConfigError("fed-mnd: timer_duration_s must be >= 0");
}

std::pair<AggregationState, std::set<VehicleId>> update_list(AggregationState state,
                                                             const std::set<VehicleId>& fresh,
                                                             double now_s) {
  if (state.mode == ListMode::stateless) {
    state.timers.clear();
    state.list = fresh;
    return {std::move(state), fresh};
  }
  for (auto id : fresh) state.timers[id] = now_s + state.timer_duration_s;
  // A zero-length timer keeps this tick's ids, like the stateless mode.
  std::erase_if(state.timers, [&](const auto& kv) {
    return kv.second < now_s || (kv.second == now_s && !fresh.contains(kv.first));
  });
  state.list.clear();
  for (const auto& [id, expiry] : state.timers) state.list.insert(id);
  auto list = state.list;
  return {std::move(state), std::move(list)};
}

void to_json(nlohmann::json& j, const MaliciousList& l) {
  std::vector<std::uint32_t> ids;
  for (auto v : l.ids) ids.push_back(raw(v));
  j = nlohmann::json{{"type", to_string(MessageType::malicious_list)},
                     {"version", l.version},
                     {"ids", ids},
                     {"mode", to_string(l.mode)},
                     {"issued_at_s", l.issued_at_s}};
}

void from_json(const nlohmann::json& j, MaliciousList& l) {
  if (j.contains("type") && j["type"] != to_string(MessageType::malicious_list))
    throw ProtocolError("not a MALICIOUS_LIST message");
  l.version = j.at("version").get<std::uint64_t>();
  l.ids.clear();
  for (const auto& id : j.at("ids")) l.ids.insert(VehicleId{id.get<std::uint32_t>()});
  l.mode = list_mode_from(j.at("mode").get<std::string>());
  l.issued_at_s = j.at("issued_at_s").get<double>();
}

Message MaliciousList::to_message() const {
  nlohmann::json payload = *this;
  payload.erase("type");
  return Message{MessageType::malicious_list, 0, 0, version, std::move(payload)};
}

MaliciousList MaliciousList::from_message(const Message& m) {
  if (m.type != MessageType::malicious_list)
    throw ProtocolError("expected MALICIOUS_LIST, got " + std::string(to_string(m.type)));
  return m.payload.get<MaliciousList>();
}

void Blocklist::replace(const MaliciousList& list) {
  ids_ = list.ids;
  version_ = list.version;
}

bool Blocklist::filter(VehicleId sender) {
  if (!blocks(sender)) return false;
  ++blocked_;
  return true;
}

MndServer::MndServer(AggregationState state) : state_(std::move(state)) {
  state_.validate();
  current_.mode = state_.mode;
}

void MndServer::submit(const Message& m) {
  if (m.type != MessageType::suspicion_report)
    throw ProtocolError("expected SUSPICION_REPORT, got " + std::string(to_string(m.type)));
  submit(m.payload.get<SuspicionReport>());
}

MaliciousList MndServer::tick(double now_s) {
  auto agg = aggregate(pending_, state_.th);
  pending_.clear();
  for (auto& w : agg.warnings) {
    logger()->warn("fed-mnd: {}", w);
    warnings_.push_back(std::move(w));
  }
  auto [next, list] = update_list(std::move(state_), agg.listed, now_s);
  state_ = std::move(next);
  state_.frequencies = std::move(agg.frequencies);
  current_ = MaliciousList{current_.version + 1, std::move(list), state_.mode, now_s};
  return current_;
}

void broadcast(const MaliciousList& list, std::map<VehicleId, Blocklist>& vehicles) {
  for (auto& [id, blocklist] : vehicles) blocklist.replace(list);
}

}  // namespace floodwatch
