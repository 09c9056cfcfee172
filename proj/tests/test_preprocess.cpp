#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "floodwatch/errors.hpp"
#include "floodwatch/preprocess.hpp"

using namespace floodwatch;

namespace {

std::vector<PacketEvent> inbound(VehicleId to, std::initializer_list<std::pair<double, std::uint32_t>> evs) {
  std::vector<PacketEvent> out;
  for (auto [t, from] : evs) out.push_back({t, VehicleId{from}, to});
  return out;
}

}  // namespace

TEST_CASE("count series bins by whole second") {
  const VehicleId me{9};
  auto evs = inbound(me, {{0.1, 1}, {0.9, 2}, {1.0, 1}, {4.5, 3}});
  evs.push_back({2.0, VehicleId{9}, VehicleId{1}});  // outbound, ignored
  const auto s = build_count_series(evs, me);
  CHECK(s.at(0) == 2);
  CHECK(s.at(1) == 1);
  CHECK(s.at(2) == 0);
  CHECK(s.at(4) == 1);
  CHECK(s.total() == 4);
}

TEST_CASE("windowize emits lagged counts and labels") {
  const VehicleId me{9};
  auto evs = inbound(me, {{5.5, 1}, {6.2, 1}, {6.4, 2}, {7.1, 1}});
  const auto s = build_count_series(evs, me);
  const TimeWindow presence{5.0, 9.0};
  std::vector<TimeWindow> windows{{6.0, 8.0}};
  const auto rows = windowize(s, presence, windows, WindowOptions{3});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].t == 5);
  CHECK(rows[0].features == std::vector<double>{1, 0, 0});  // lags before joining are zero
  CHECK(rows[1].features == std::vector<double>{2, 1, 0});
  CHECK(rows[2].features == std::vector<double>{1, 2, 1});
  CHECK_FALSE(rows[0].positive());
  CHECK(rows[1].positive());
  CHECK(rows[2].positive());
  CHECK_FALSE(rows[3].positive());
  CHECK_THROWS_AS(windowize(s, presence, windows, WindowOptions{0}), ConfigError);
}

TEST_CASE("presence seconds cover partial seconds") {
  CHECK(presence_seconds({2.5, 7.2}) == std::pair<std::int64_t, std::int64_t>{2, 7});
  CHECK(presence_seconds({3.0, 5.0}) == std::pair<std::int64_t, std::int64_t>{3, 4});
}

TEST_CASE("attack-traffic labelling needs the attacker series") {
  const VehicleId me{9};
  auto evs = inbound(me, {{6.5, 1}});
  const auto s = build_count_series(evs, me);
  std::vector<TimeWindow> windows{{6.0, 8.0}};
  WindowOptions o{2, true};
  CHECK_THROWS_AS(windowize(s, {5, 9}, windows, o), ConfigError);
  const auto rows = windowize(s, {5, 9}, windows, o, &s);
  CHECK(rows[1].positive());
  CHECK_FALSE(rows[2].positive());  // window open but no hostile packet
}

TEST_CASE("interval counts fill consecutive intervals from the first packet") {
  const VehicleId me{9};
  auto evs = inbound(me, {{12.3, 1}, {13.0, 2}, {25.0, 1}, {41.0, 3}});
  const auto ivs = interval_counts(evs, me, IntervalMode::alert);
  REQUIRE(ivs.size() == 3);
  CHECK(ivs[0].interval == TimeWindow{12, 22});
  CHECK(ivs[0].total() == 2);
  CHECK(ivs[1].per_sender.at(VehicleId{1}) == 1);
  CHECK(ivs[2].interval == TimeWindow{32, 42});
  CHECK(interval_counts(evs, me, IntervalMode::normal).size() == 1);
}

TEST_CASE("counts within an interval") {
  const VehicleId me{9};
  auto evs = inbound(me, {{1, 1}, {2, 2}, {2.5, 2}, {3, 1}, {10, 2}});
  const auto c = counts_in(evs, me, {2, 10});
  CHECK(c.per_sender.at(VehicleId{2}) == 2);
  CHECK(c.per_sender.at(VehicleId{1}) == 1);
  CHECK(c.total() == 3);
}

TEST_CASE("feature csv layout") {
  const VehicleId me{9};
  auto evs = inbound(me, {{5.5, 1}});
  const auto rows = windowize(build_count_series(evs, me), {5, 7}, {}, WindowOptions{});
  const auto p = std::filesystem::temp_directory_path() / "floodwatch_features.csv";
  write_feature_csv(p, rows, true);
  std::ifstream in(p);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "t,f0,f1,f2,f3,f4,f5,f6,f7,f8,f9,label,synthetic");
  CHECK(first == "5,1,0,0,0,0,0,0,0,0,0,0,0");
}
