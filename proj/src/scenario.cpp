#include "floodwatch/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/log.hpp"
#include "floodwatch/rng.hpp"

namespace floodwatch {

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid scenario config: " + what); };
  if (duration_s <= 0) fail("duration_s must be > 0");
  if (total_vehicles == 0) fail("total_vehicles must be >= 1");
  if (!(attacker_fraction >= 0.0 && attacker_fraction <= 1.0))
    fail("attacker_fraction must lie in [0,1]");
  if (concurrent_range.first > concurrent_range.second)
    fail("concurrent_range.min must be <= concurrent_range.max");
  if (concurrent_range.first == 0) fail("concurrent_range.min must be >= 1");
  if (!(arrival_interval_s > 0)) fail("arrival_interval_s must be > 0");
  if (attack_spacing_s < 0) fail("attack_spacing_s must be >= 0");
  if (!(attack_duration_s >= 0)) fail("attack_duration_s must be >= 0");
  if (static_cast<double>(attack_count) * attack_spacing_s > static_cast<double>(duration_s))
    fail("attack_count * attack_spacing_s must be <= duration_s");
  if (first_attack_s && *first_attack_s < 0) fail("first_attack_s must be >= 0");
  if (!(normal_rate_pps >= 0)) fail("normal_rate_pps must be >= 0");
  if (!(flood_rate_pps > normal_rate_pps)) fail("flood_rate_pps must exceed normal_rate_pps");
  if (!(neighbor_degree >= 0)) fail("neighbor_degree must be >= 0");
  if (attack_count > 1 && attack_spacing_s < attack_duration_s)
    fail("attack_spacing_s must be >= attack_duration_s so windows do not overlap");
}

bool GroundTruth::in_attack(double t) const {
  return std::any_of(attack_windows.begin(), attack_windows.end(),
                     [t](const TimeWindow& w) { return w.contains(t); });
}

std::optional<TimeWindow> GroundTruth::presence_of(VehicleId v) const {
  auto it = presence.find(v);
  if (it == presence.end()) return std::nullopt;
  return it->second;
}

std::vector<TimeWindow> attack_schedule(const ScenarioConfig& config) {
  std::vector<TimeWindow> windows;
  const double first = config.first_attack_s.value_or(config.attack_spacing_s);
  const auto duration = static_cast<double>(config.duration_s);
  for (std::uint32_t k = 0; k < config.attack_count; ++k) {
    double start = std::min(first + k * config.attack_spacing_s, duration);
    double end = std::min(start + config.attack_duration_s, duration);
    windows.push_back({start, end});
  }
  return windows;
}

namespace {

struct Vehicle {
  VehicleId id;
  TimeWindow presence;
};

std::vector<Vehicle> schedule_presence(const ScenarioConfig& config, Rng& rng) {
  const auto duration = static_cast<double>(config.duration_s);
  const double min_trip = config.concurrent_range.first * config.arrival_interval_s;
  const double max_trip = config.concurrent_range.second * config.arrival_interval_s;
  // The first concurrent_range.min vehicles arrive one per second so the cell
  // starts populated, the rest every arrival_interval_s.
  const std::uint32_t initial = config.concurrent_range.first;

  std::vector<Vehicle> vehicles;
  for (std::uint32_t i = 0; i < config.total_vehicles; ++i) {
    double enter = i < initial ? static_cast<double>(i)
                               : initial + (i - initial) * config.arrival_interval_s;
    if (enter >= duration) {
      logger()->warn("vehicle {} would enter at {:.1f}s, after the end of the run; dropped", i,
                     enter);
      break;
    }
    double trip = rng.uniform(min_trip, max_trip);
    vehicles.push_back({VehicleId{i}, {enter, std::min(enter + trip, duration)}});
  }
  return vehicles;
}

std::set<VehicleId> choose_attackers(const ScenarioConfig& config,
                                     const std::vector<Vehicle>& vehicles,
                                     const std::vector<TimeWindow>& windows, Rng& rng) {
  auto budget = static_cast<std::size_t>(
      std::llround(config.attacker_fraction * static_cast<double>(vehicles.size())));
  std::set<VehicleId> attackers;
  // Every window gets an attacker present for its whole length when the
  // budget allows, otherwise a window could pass with nobody attacking.
  for (const auto& w : windows) {
    if (attackers.size() >= budget || w.length() <= 0) break;
    bool covered = std::any_of(vehicles.begin(), vehicles.end(), [&](const Vehicle& v) {
      return attackers.contains(v.id) && v.presence.start_s <= w.start_s &&
             v.presence.end_s >= w.end_s;
    });
    if (covered) continue;
    std::vector<VehicleId> candidates;
    for (const auto& v : vehicles) {
      if (!attackers.contains(v.id) && v.presence.start_s <= w.start_s &&
          v.presence.end_s >= w.end_s)
        candidates.push_back(v.id);
    }
    if (candidates.empty()) {
      for (const auto& v : vehicles) {
        if (!attackers.contains(v.id) && v.presence.start_s < w.end_s &&
            v.presence.end_s > w.start_s)
          candidates.push_back(v.id);
      }
    }
    if (!candidates.empty()) attackers.insert(candidates[rng.below(candidates.size())]);
  }
  std::vector<VehicleId> rest;
  for (const auto& v : vehicles)
    if (!attackers.contains(v.id)) rest.push_back(v.id);
  rng.shuffle(rest.begin(), rest.end());
  for (std::size_t i = 0; attackers.size() < budget && i < rest.size(); ++i)
    attackers.insert(rest[i]);
  return attackers;
}

void emit(std::vector<PacketEvent>& out, Rng& rng, VehicleId from, VehicleId to, double rate,
          double start, double end) {
  if (rate <= 0) return;
  double t = start + rng.exponential(rate);
  while (t < end) {
    out.push_back({t, from, to});
    t += rng.exponential(rate);
  }
}

}  // namespace

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.rng_seed);
  const auto duration = static_cast<double>(config.duration_s);

  auto vehicles = schedule_presence(config, rng);
  GroundTruth truth;
  truth.attack_windows = attack_schedule(config);
  truth.attackers = choose_attackers(config, vehicles, truth.attack_windows, rng);
  for (const auto& v : vehicles) truth.presence.emplace(v.id, v.presence);

  std::vector<double> cuts{0.0, duration};
  for (const auto& v : vehicles) {
    cuts.push_back(v.presence.start_s);
    cuts.push_back(v.presence.end_s);
  }
  for (const auto& w : truth.attack_windows) {
    cuts.push_back(w.start_s);
    cuts.push_back(w.end_s);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<PacketEvent> events;
  std::vector<VehicleId> present;
  std::vector<std::pair<VehicleId, VehicleId>> edges;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s];
    const double b = cuts[s + 1];
    if (a >= duration) break;

    std::vector<VehicleId> now;
    for (const auto& v : vehicles)
      if (v.presence.start_s <= a && v.presence.end_s >= b) now.push_back(v.id);
    if (now != present) {
      present = std::move(now);
      edges.clear();
      if (present.size() >= 2) {
        const double p =
            std::min(1.0, config.neighbor_degree / static_cast<double>(present.size() - 1));
        for (std::size_t i = 0; i < present.size(); ++i)
          for (std::size_t j = i + 1; j < present.size(); ++j)
            if (p >= 1.0 || rng.uniform() < p) edges.emplace_back(present[i], present[j]);
      }
    }

    const bool attack = truth.in_attack(a);
    auto rate_of = [&](VehicleId sender) {
      return attack && truth.is_attacker(sender) ? config.flood_rate_pps : config.normal_rate_pps;
    };
    for (const auto& [u, v] : edges) {
      emit(events, rng, u, v, rate_of(u), a, b);
      emit(events, rng, v, u, rate_of(v), a, b);
    }
  }

  std::sort(events.begin(), events.end(), [](const PacketEvent& x, const PacketEvent& y) {
    if (x.time_s != y.time_s) return x.time_s < y.time_s;
    if (x.sender != y.sender) return x.sender < y.sender;
    return x.receiver < y.receiver;
  });
  return {std::move(events), std::move(truth)};
}

// --- CSV ------------------------------------------------------------------

namespace {

constexpr std::string_view kHeader = "time_s,sender,receiver";
constexpr std::string_view kAnnotatedHeader =
    "time_s,sender,receiver,is_attacker_sender,attack_active";

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* name) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError(std::string("malformed ") + name + " '" + std::string(field) + "'", line);
  return value;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

Scenario ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open event log " + path.string());

  Scenario out;
  std::string line;
  std::size_t lineno = 0;
  bool annotated = false;
  bool have_header = false;
  std::set<VehicleId> attackers;
  std::set<std::int64_t> attack_seconds;
  std::map<VehicleId, TimeWindow> span;
  auto observe = [&span](VehicleId v, double t) {
    auto [it, inserted] = span.try_emplace(v, TimeWindow{t, t});
    if (!inserted) {
      it->second.start_s = std::min(it->second.start_s, t);
      it->second.end_s = std::max(it->second.end_s, t);
    }
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line == kHeader) {
        annotated = false;
      } else if (line == kAnnotatedHeader) {
        annotated = true;
      } else {
        throw ParseError("unexpected header '" + line + "'", lineno);
      }
      have_header = true;
      continue;
    }
    auto fields = split(line, ',');
    const std::size_t expected = annotated ? 5 : 3;
    if (fields.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    PacketEvent ev;
    ev.time_s = parse_number<double>(fields[0], lineno, "time_s");
    if (!std::isfinite(ev.time_s) || ev.time_s < 0)
      throw ParseError("time_s must be a nonnegative finite number", lineno);
    ev.sender = VehicleId{parse_number<std::uint32_t>(fields[1], lineno, "sender")};
    ev.receiver = VehicleId{parse_number<std::uint32_t>(fields[2], lineno, "receiver")};
    if (ev.sender == ev.receiver) throw ParseError("sender equals receiver", lineno);
    if (annotated) {
      auto is_attacker = parse_number<int>(fields[3], lineno, "is_attacker_sender");
      auto active = parse_number<int>(fields[4], lineno, "attack_active");
      if ((is_attacker != 0 && is_attacker != 1) || (active != 0 && active != 1))
        throw ParseError("annotation flags must be 0 or 1", lineno);
      if (is_attacker) attackers.insert(ev.sender);
      if (active) attack_seconds.insert(static_cast<std::int64_t>(std::floor(ev.time_s)));
    }
    observe(ev.sender, ev.time_s);
    observe(ev.receiver, ev.time_s);
    out.events.push_back(ev);
  }

  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const PacketEvent& a, const PacketEvent& b) { return a.time_s < b.time_s; });

  if (annotated) {
    GroundTruth truth;
    truth.attackers = std::move(attackers);
    for (auto it = attack_seconds.begin(); it != attack_seconds.end();) {
      auto first = *it;
      auto last = first;
      ++it;
      while (it != attack_seconds.end() && *it == last + 1) last = *it++;
      truth.attack_windows.push_back({static_cast<double>(first), static_cast<double>(last + 1)});
    }
    // Presence is only observable as the span of traffic touching a vehicle.
    for (const auto& [v, w] : span)
      truth.presence.emplace(v, TimeWindow{w.start_s, std::nextafter(w.end_s, INFINITY)});
    out.truth = std::move(truth);
  }
  return out;
}

void write_event_log(const std::filesystem::path& path, std::span<const PacketEvent> events,
                     const GroundTruth* truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write event log " + path.string());
  out << (truth ? kAnnotatedHeader : kHeader) << '\n';
  std::string row;
  for (const auto& ev : events) {
    row.clear();
    row += format_double(ev.time_s);
    row += ',';
    row += std::to_string(raw(ev.sender));
    row += ',';
    row += std::to_string(raw(ev.receiver));
    if (truth) {
      row += truth->is_attacker(ev.sender) ? ",1" : ",0";
      row += truth->in_attack(ev.time_s) ? ",1" : ",0";
    }
    row += '\n';
    out << row;
  }
}

void to_json(nlohmann::json& j, const GroundTruth& truth) {
  j = nlohmann::json::object();
  auto& attackers = j["attackers"] = nlohmann::json::array();
  for (auto v : truth.attackers) attackers.push_back(raw(v));
  auto& windows = j["attack_windows"] = nlohmann::json::array();
  for (const auto& w : truth.attack_windows) windows.push_back({w.start_s, w.end_s});
  auto& presence = j["presence"] = nlohmann::json::object();
  for (const auto& [v, w] : truth.presence)
    presence[std::to_string(raw(v))] = {w.start_s, w.end_s};
}

void from_json(const nlohmann::json& j, GroundTruth& truth) {
  truth = {};
  for (const auto& a : j.at("attackers")) truth.attackers.insert(VehicleId{a.get<std::uint32_t>()});
  for (const auto& w : j.at("attack_windows"))
    truth.attack_windows.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
  for (const auto& [key, w] : j.at("presence").items())
    truth.presence.emplace(VehicleId{static_cast<std::uint32_t>(std::stoul(key))},
                           TimeWindow{w.at(0).get<double>(), w.at(1).get<double>()});
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ground truth " + path.string());
  out << nlohmann::json(truth).dump(1) << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth " + path.string());
  return nlohmann::json::parse(in).get<GroundTruth>();
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = {{"duration_s", c.duration_s},
       {"total_vehicles", c.total_vehicles},
       {"concurrent_range", {c.concurrent_range.first, c.concurrent_range.second}},
       {"arrival_interval_s", c.arrival_interval_s},
       {"attacker_fraction", c.attacker_fraction},
       {"attack_count", c.attack_count},
       {"attack_spacing_s", c.attack_spacing_s},
       {"attack_duration_s", c.attack_duration_s},
       {"normal_rate_pps", c.normal_rate_pps},
       {"flood_rate_pps", c.flood_rate_pps},
       {"neighbor_degree", c.neighbor_degree},
       {"rng_seed", c.rng_seed}};
  if (c.first_attack_s) j["first_attack_s"] = *c.first_attack_s;
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  static const std::set<std::string> known{
      "duration_s",        "total_vehicles",    "concurrent_range", "arrival_interval_s",
      "attacker_fraction", "attack_count",      "attack_spacing_s", "attack_duration_s",
      "first_attack_s",    "normal_rate_pps",   "flood_rate_pps",   "neighbor_degree",
      "rng_seed"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown scenario config key '" + key + "'");
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) {
      try {
        j.at(key).get_to(field);
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("scenario config field '") + key + "' has the wrong type");
      }
    }
  };
  get("duration_s", c.duration_s);
  get("total_vehicles", c.total_vehicles);
  if (j.contains("concurrent_range")) {
    const auto& r = j.at("concurrent_range");
    if (!r.is_array() || r.size() != 2)
      throw ConfigError("scenario config field 'concurrent_range' must be [min,max]");
    c.concurrent_range = {r[0].get<std::uint32_t>(), r[1].get<std::uint32_t>()};
  }
  get("arrival_interval_s", c.arrival_interval_s);
  get("attacker_fraction", c.attacker_fraction);
  get("attack_count", c.attack_count);
  get("attack_spacing_s", c.attack_spacing_s);
  get("attack_duration_s", c.attack_duration_s);
  if (j.contains("first_attack_s") && !j.at("first_attack_s").is_null()) {
    double first = 0;
    get("first_attack_s", first);
    c.first_attack_s = first;
  }
  get("normal_rate_pps", c.normal_rate_pps);
  get("flood_rate_pps", c.flood_rate_pps);
  get("neighbor_degree", c.neighbor_degree);
  get("rng_seed", c.rng_seed);
}

std::map<VehicleId, std::vector<PacketEvent>> partition_by_receiver(
    std::span<const PacketEvent> events) {
  std::map<VehicleId, std::vector<PacketEvent>> out;
  for (const auto& ev : events) out[ev.receiver].push_back(ev);
  return out;
}

}  // namespace floodwatch
