#include <doctest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/fed_mnd.hpp"
#include "floodwatch/protocol.hpp"

using namespace floodwatch;

namespace {

const VehicleId A{101}, B{102}, C{103};

SuspicionReport report(std::uint32_t reporter, std::set<VehicleId> suspected) {
  SuspicionReport r;
  r.reporter = VehicleId{reporter};
  r.interval = {0, 10};
  r.suspected = std::move(suspected);
  return r;
}

std::vector<SuspicionReport> sample() {
  return {report(1, {A, B}), report(2, {A}), report(3, {A, C})};
}

}  // namespace

TEST_CASE("aggregate counts distinct reporters") {
  const auto reports = sample();
  CHECK(aggregate(reports, 2).listed == std::set<VehicleId>{A});
  CHECK(aggregate(reports, 1).listed == std::set<VehicleId>{A, B, C});
  CHECK(aggregate(reports, 2).frequencies.at(A) == 3);
  CHECK(aggregate(reports, 4).listed.empty());
}

TEST_CASE("one reporter naming a suspect twice counts once") {
  std::vector<SuspicionReport> reports{report(1, {A}), report(1, {A})};
  CHECK(aggregate(reports, 1).frequencies.at(A) == 1);
  CHECK(aggregate(reports, 2).listed.empty());
}

TEST_CASE("self reports are dropped with a warning") {
  std::vector<SuspicionReport> reports{report(7, {VehicleId{7}, A})};
  auto agg = aggregate(reports, 1);
  CHECK(agg.listed == std::set<VehicleId>{A});
  CHECK(agg.warnings.size() == 1);
}

TEST_CASE("aggregate is permutation invariant and monotone") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SuspicionReport> reports;
    const int n = 1 + static_cast<int>(gen() % 8);
    for (int r = 0; r < n; ++r) {
      std::set<VehicleId> s;
      for (int k = 0; k < 3; ++k) s.insert(VehicleId{static_cast<std::uint32_t>(50 + gen() % 6)});
      reports.push_back(report(static_cast<std::uint32_t>(1 + gen() % 10), s));
    }
    const std::uint32_t th = 1 + static_cast<std::uint32_t>(gen() % 3);
    const auto base = aggregate(reports, th).listed;
    auto shuffled = reports;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(aggregate(shuffled, th).listed == base);
    shuffled.push_back(report(99, {VehicleId{50}}));
    const auto grown = aggregate(shuffled, th).listed;
    CHECK(std::includes(grown.begin(), grown.end(), base.begin(), base.end()));
    // TH=1 is the union.
    std::set<VehicleId> all;
    for (const auto& r : reports) all.insert(r.suspected.begin(), r.suspected.end());
    CHECK(aggregate(reports, 1).listed == all);
  }
}

TEST_CASE("stateful list expires after the timer") {
  AggregationState s{ListMode::stateful, 1, 120, {}, {}, {}};
  auto [s1, l1] = update_list(s, {A}, 0);
  CHECK(l1 == std::set<VehicleId>{A});
  auto [s2, l2] = update_list(s1, {}, 121);
  CHECK(l2.empty());
}

TEST_CASE("re-reporting resets the timer") {
  AggregationState s{ListMode::stateful, 1, 120, {}, {}, {}};
  auto [s1, l1] = update_list(s, {A}, 0);
  auto [s2, l2] = update_list(s1, {A}, 100);
  CHECK(s2.timers.at(A) == 220);
  auto [s3, l3] = update_list(s2, {}, 121);
  CHECK(l3 == std::set<VehicleId>{A});
}

TEST_CASE("stateless list forgets the previous round") {
  AggregationState s;
  auto [s1, l1] = update_list(s, {A}, 0);
  CHECK(l1 == std::set<VehicleId>{A});
  auto [s2, l2] = update_list(s1, {}, 10);
  CHECK(l2.empty());
  CHECK(s2.timers.empty());
}

TEST_CASE("stateful with a zero timer matches stateless on every tick") {
  std::mt19937_64 gen(8);
  AggregationState stateless;
  AggregationState stateful{ListMode::stateful, 1, 0, {}, {}, {}};
  for (int tick = 0; tick < 50; ++tick) {
    std::set<VehicleId> fresh;
    for (int k = 0; k < 3; ++k)
      if (gen() % 2) fresh.insert(VehicleId{static_cast<std::uint32_t>(gen() % 5)});
    auto [a, la] = update_list(stateless, fresh, tick * 10.0);
    auto [b, lb] = update_list(stateful, fresh, tick * 10.0);
    CHECK(la == lb);
    stateless = a;
    stateful = b;
  }
}

TEST_CASE("malicious list message round trip") {
  MaliciousList list{4, {A, C}, ListMode::stateful, 310.5};
  nlohmann::json j = list;
  CHECK(j.at("type") == "MALICIOUS_LIST");
  CHECK(j.at("ids") == nlohmann::json::array({101, 103}));
  CHECK(nlohmann::json::parse(j.dump()).get<MaliciousList>() == list);

  const auto line = list.to_message().serialize();
  CHECK(MaliciousList::from_message(Message::parse(line)) == list);
  CHECK_THROWS_AS(MaliciousList::from_message(Message{MessageType::onset_report, 1, 0, 0, {}}),
                  ProtocolError);
}

TEST_CASE("broadcast replaces blocklists") {
  std::map<VehicleId, Blocklist> vehicles{{VehicleId{1}, {}}, {VehicleId{2}, {}}};
  broadcast(MaliciousList{1, {A}, ListMode::stateless, 10}, vehicles);
  for (auto& [v, bl] : vehicles) {
    CHECK(bl.blocks(A));
    CHECK(bl.filter(A));
    CHECK_FALSE(bl.filter(B));
    CHECK(bl.blocked() == 1);
  }
  broadcast(MaliciousList{2, {}, ListMode::stateless, 20}, vehicles);
  for (auto& [v, bl] : vehicles) {
    CHECK(bl.ids().empty());
    CHECK(bl.version() == 2);
  }
}

TEST_CASE("server aggregates one window per tick") {
  MndServer server(AggregationState{ListMode::stateless, 2, 120, {}, {}, {}});
  for (const auto& r : sample())
    server.submit(Message{MessageType::suspicion_report, raw(r.reporter), 0, 0, r});
  auto list = server.tick(10);
  CHECK(list.ids == std::set<VehicleId>{A});
  CHECK(list.version == 1);
  // A vehicle joining now gets the latest list.
  CHECK(server.current() == list);
  CHECK(server.tick(20).ids.empty());
  CHECK(server.current().version == 2);
}

TEST_CASE("invalid threshold is rejected") {
  CHECK_THROWS_AS(aggregate(sample(), 0), ConfigError);
  CHECK_THROWS_AS(MndServer(AggregationState{ListMode::stateless, 0, 1, {}, {}, {}}), ConfigError);
}
