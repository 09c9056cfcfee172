#include "floodwatch/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "floodwatch/errors.hpp"

namespace floodwatch {

std::uint64_t CountSeries::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const auto& kv) { return acc + kv.second; });
}

std::uint64_t NeighborCounts::total() const {
  return std::accumulate(per_sender.begin(), per_sender.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const auto& kv) { return acc + kv.second; });
}

std::pair<std::int64_t, std::int64_t> presence_seconds(const TimeWindow& presence) {
  auto first = static_cast<std::int64_t>(std::floor(presence.start_s));
  auto last = static_cast<std::int64_t>(std::ceil(presence.end_s)) - 1;
  return {first, last};
}

CountSeries build_count_series(std::span<const PacketEvent> events, VehicleId vehicle) {
  CountSeries series{vehicle, {}};
  for (const auto& ev : events)
    if (ev.receiver == vehicle) ++series.counts[static_cast<std::int64_t>(std::floor(ev.time_s))];
  return series;
}

std::vector<FeatureRow> windowize(const CountSeries& series, const GroundTruth& truth,
                                  const WindowOptions& options) {
  auto presence = truth.presence_of(series.vehicle);
  if (!presence) {
    if (series.counts.empty()) return {};
    presence = TimeWindow{static_cast<double>(series.counts.begin()->first),
                          static_cast<double>(series.counts.rbegin()->first + 1)};
  }
  return windowize(series, *presence, truth.attack_windows, options);
}

std::vector<FeatureRow> windowize(const CountSeries& series, const TimeWindow& presence,
                                  std::span<const TimeWindow> attack_windows,
                                  const WindowOptions& options, const CountSeries* attack_series) {
  if (options.lags == 0) throw ConfigError("window length a must be >= 1");
  if (options.require_attack_traffic && attack_series == nullptr)
    throw ConfigError("require_attack_traffic needs the attacker-only count series");

  auto [first, last] = presence_seconds(presence);
  std::vector<FeatureRow> rows;
  if (last < first) return rows;
  rows.reserve(static_cast<std::size_t>(last - first + 1));
  const auto a = static_cast<std::int64_t>(options.lags);
  for (std::int64_t t = first; t <= last; ++t) {
    FeatureRow row;
    row.vehicle = series.vehicle;
    row.t = t;
    row.features.resize(options.lags);
    for (std::int64_t lag = 0; lag < a; ++lag)
      row.features[static_cast<std::size_t>(lag)] = series.at(t - lag);
    const auto td = static_cast<double>(t);
    bool in_window = std::any_of(attack_windows.begin(), attack_windows.end(),
                                 [td](const TimeWindow& w) { return w.contains(td); });
    if (in_window && options.require_attack_traffic) in_window = attack_series->at(t) > 0;
    row.label = in_window ? Label::positive : Label::negative;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<NeighborCounts> interval_counts(std::span<const PacketEvent> events, VehicleId vehicle,
                                            IntervalMode mode, const IntervalConfig& config) {
  const double length = config.length(mode);
  if (!(length > 0)) throw ConfigError("interval length must be > 0");
  std::vector<NeighborCounts> out;
  bool anchored = false;
  double anchor = 0;
  for (const auto& ev : events) {
    if (ev.receiver != vehicle) continue;
    if (!anchored) {
      anchor = std::floor(ev.time_s);
      anchored = true;
    }
    auto index = static_cast<std::size_t>(std::floor((ev.time_s - anchor) / length));
    while (out.size() <= index) {
      double start = anchor + static_cast<double>(out.size()) * length;
      out.push_back({vehicle, {start, start + length}, {}});
    }
    ++out[index].per_sender[ev.sender];
  }
  return out;
}

NeighborCounts counts_in(std::span<const PacketEvent> events, VehicleId vehicle,
                         const TimeWindow& interval) {
  NeighborCounts out{vehicle, interval, {}};
  auto by_time = [](const PacketEvent& ev, double t) { return ev.time_s < t; };
  auto it = std::lower_bound(events.begin(), events.end(), interval.start_s, by_time);
  for (; it != events.end() && it->time_s < interval.end_s; ++it)
    if (it->receiver == vehicle) ++out.per_sender[it->sender];
  return out;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows,
                       bool with_synthetic_column) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature file " + path.string());
  const std::size_t a = rows.empty() ? 10 : rows.front().features.size();
  out << 't';
  for (std::size_t i = 0; i < a; ++i) out << ",f" << i;
  out << ",label";
  if (with_synthetic_column) out << ",synthetic";
  out << '\n';
  out.precision(17);
  for (const auto& row : rows) {
    out << row.t;
    for (double f : row.features) out << ',' << f;
    out << ',' << (row.positive() ? 1 : 0);
    if (with_synthetic_column) out << ',' << (row.synthetic ? 1 : 0);
    out << '\n';
  }
}

}  // namespace floodwatch
