#include "floodwatch/mnd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"

namespace floodwatch {

void MadParams::validate() const {
  if (!(b > 0)) throw ConfigError("mnd: b must be > 0");
  if (!(ce > 0)) throw ConfigError("mnd: ce must be > 0");
}

double median(std::span<const double> values) {
  if (values.empty()) throw DomainError("median of an empty list");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::ranges::nth_element(v, v.begin() + static_cast<std::ptrdiff_t>(mid));
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2;
}

double mad(std::span<const double> values, double b) {
  if (values.empty()) throw DomainError("MAD of an empty list");
  const double m = median(values);
  std::vector<double> dev(values.size());
  std::ranges::transform(values, dev.begin(), [m](double x) { return std::abs(x - m); });
  return b * median(dev);
}

std::pair<double, double> rejection_bounds(std::span<const double> values,
                                           const MadParams& params) {
  const double m = median(values);
  const double s = mad(values, params.b);
  return {m - params.ce * s, m + params.ce * s};
}

SuspicionReport detect(const NeighborCounts& counts, const MadParams& params) {
  SuspicionReport report{counts.vehicle, counts.interval, {}, {}};
  if (counts.per_sender.empty()) return report;
  std::vector<double> values;
  values.reserve(counts.per_sender.size());
  for (const auto& [sender, n] : counts.per_sender) values.push_back(n);
  report.stats.median = median(values);
  report.stats.mad = mad(values, params.b);
  report.stats.upper_tr = report.stats.median + params.ce * report.stats.mad;
  if (values.size() < 2) return report;
  for (const auto& [sender, n] : counts.per_sender)
    if (static_cast<double>(n) > report.stats.upper_tr) report.suspected.insert(sender);
  return report;
}

void to_json(nlohmann::json& j, const SuspicionReport& r) {
  std::vector<std::uint32_t> ids;
  for (auto v : r.suspected) ids.push_back(raw(v));
  j = nlohmann::json{{"reporter", raw(r.reporter)},
                     {"interval", {r.interval.start_s, r.interval.end_s}},
                     {"suspected", ids},
                     {"stats",
                      {{"M", r.stats.median}, {"mad", r.stats.mad}, {"upper_tr", r.stats.upper_tr}}}};
}

void from_json(const nlohmann::json& j, SuspicionReport& r) {
  r.reporter = VehicleId{j.at("reporter").get<std::uint32_t>()};
  const auto& iv = j.at("interval");
  if (!iv.is_array() || iv.size() != 2) throw ProtocolError("suspicion report: bad interval");
  r.interval = TimeWindow{iv[0].get<double>(), iv[1].get<double>()};
  r.suspected.clear();
  for (const auto& id : j.at("suspected")) r.suspected.insert(VehicleId{id.get<std::uint32_t>()});
  const auto& s = j.at("stats");
  r.stats = MadStats{s.at("M").get<double>(), s.at("mad").get<double>(),
                     s.at("upper_tr").get<double>()};
}

void to_json(nlohmann::json& j, const MadParams& p) { j = {{"b", p.b}, {"ce", p.ce}}; }

void from_json(const nlohmann::json& j, MadParams& p) {
  for (const auto& [k, v] : j.items())
    if (k != "b" && k != "ce") throw ConfigError("mnd: unknown key '" + k + "'");
  try {
    if (j.contains("b")) p.b = j["b"].get<double>();
    if (j.contains("ce")) p.ce = j["ce"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mnd: ") + e.what());
  }
  p.validate();
}

}  // namespace floodwatch
