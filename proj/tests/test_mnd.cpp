#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/mnd.hpp"

using namespace floodwatch;

namespace {

// Straightforward reference: full sort, pick the middle.
double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

double sorted_mad(const std::vector<double>& v, double b) {
  const double m = sorted_median(v);
  std::vector<double> d;
  for (double x : v) d.push_back(std::fabs(x - m));
  return b * sorted_median(d);
}

NeighborCounts counts_of(const std::vector<std::uint32_t>& values) {
  NeighborCounts c;
  c.vehicle = VehicleId{1000};
  c.interval = {0, 10};
  for (std::size_t i = 0; i < values.size(); ++i)
    c.per_sender[VehicleId{static_cast<std::uint32_t>(i + 1)}] = values[i];
  return c;
}

}  // namespace

TEST_CASE("mad of a constant series is zero") {
  std::vector<double> v{5, 5, 5};
  CHECK(mad(v) == 0.0);
}

TEST_CASE("mad with one large outlier") {
  std::vector<double> v{4, 4, 5, 5, 5, 6, 120};
  CHECK(median(v) == 5.0);
  CHECK(mad(v, 1.4826) == doctest::Approx(1.4826).epsilon(1e-15));
  CHECK(mad(v, 1.4826) == sorted_mad(v, 1.4826));
}

TEST_CASE("mad of two elements averages the middle pair") {
  std::vector<double> v{1, 2};
  CHECK(median(v) == 1.5);
  CHECK(mad(v, 1.0) == 0.5);
}

TEST_CASE("empty input is a domain error") {
  std::vector<double> v;
  CHECK_THROWS_AS(median(v), DomainError);
  CHECK_THROWS_AS(mad(v), DomainError);
  CHECK_THROWS_AS(rejection_bounds(v), DomainError);
}

TEST_CASE("rejection bounds") {
  SUBCASE("constant series collapses to a point") {
    std::vector<double> v{7, 7, 7, 7};
    auto [lo, hi] = rejection_bounds(v);
    CHECK(lo == 7.0);
    CHECK(hi == 7.0);
  }
  SUBCASE("upper bound for the outlier example") {
    std::vector<double> v{4, 4, 5, 5, 5, 6, 120};
    auto [lo, hi] = rejection_bounds(v);
    CHECK(hi == doctest::Approx(9.4478).epsilon(1e-12));
    CHECK(lo == doctest::Approx(5 - 3 * 1.4826).epsilon(1e-12));
  }
  SUBCASE("huge ce admits every value") {
    std::vector<double> v{1, 2, 3, 1000};
    auto [lo, hi] = rejection_bounds(v, MadParams{1.4826, 1e12});
    for (double x : v) CHECK((x >= lo && x <= hi));
  }
}

TEST_CASE("detect flags the flooding sender only") {
  auto r = detect(counts_of({4, 4, 5, 5, 5, 6, 120}));
  CHECK(r.suspected == std::set<VehicleId>{VehicleId{7}});
  CHECK(r.stats.median == 5.0);
  CHECK(r.stats.upper_tr == doctest::Approx(9.4478));
  CHECK(r.reporter == VehicleId{1000});
}

TEST_CASE("detect with equal counts flags nobody") {
  CHECK(detect(counts_of({9, 9, 9, 9})).suspected.empty());
}

TEST_CASE("a constant series flags any sender above it") {
  auto r = detect(counts_of({3, 3, 3, 3, 3, 4}));
  CHECK(r.suspected == std::set<VehicleId>{VehicleId{6}});
}

TEST_CASE("fewer than two neighbours yields no suspects") {
  CHECK(detect(counts_of({500})).suspected.empty());
  CHECK(detect(counts_of({})).suspected.empty());
}

TEST_CASE("detect properties on random vectors") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + gen() % 11;
    std::vector<std::uint32_t> counts(n);
    for (auto& c : counts) c = static_cast<std::uint32_t>(gen() % 201);
    const auto base = detect(counts_of(counts));

    // Never flags at or below the median.
    for (auto id : base.suspected) CHECK(counts[raw(id) - 1] > base.stats.median);

    // Translation and positive scaling leave the suspect set unchanged.
    auto shifted = counts;
    for (auto& c : shifted) c += 37;
    CHECK(detect(counts_of(shifted)).suspected == base.suspected);
    auto scaled = counts;
    for (auto& c : scaled) c *= 4;
    CHECK(detect(counts_of(scaled)).suspected == base.suspected);

    // Exhaustive subset oracle: the only subset S where every member is
    // above the bound and every non-member is not.
    std::vector<double> values(counts.begin(), counts.end());
    const double upper = sorted_median(values) + 3.0 * sorted_mad(values, 1.4826);
    std::set<VehicleId> oracle;
    std::size_t matches = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      bool ok = true;
      for (std::size_t i = 0; i < n && ok; ++i) {
        const bool in = mask & (1u << i);
        ok = in == (values[i] > upper);
      }
      if (!ok) continue;
      ++matches;
      oracle.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) oracle.insert(VehicleId{static_cast<std::uint32_t>(i + 1)});
    }
    REQUIRE(matches == 1);
    CHECK(base.suspected == oracle);
  }
}

TEST_CASE("mad is translation invariant and scale covariant") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + gen() % 12);
    for (auto& x : v) x = static_cast<double>(gen() % 200);
    auto shifted = v;
    for (auto& x : shifted) x += 64;
    CHECK(mad(shifted) == doctest::Approx(mad(v)));
    CHECK(median(shifted) == doctest::Approx(median(v) + 64));
    auto scaled = v;
    for (auto& x : scaled) x *= 2;
    CHECK(mad(scaled) == doctest::Approx(2 * mad(v)));
    std::shuffle(v.begin(), v.end(), gen);
    CHECK(mad(v) == sorted_mad(v, 1.4826));
  }
}

TEST_CASE("suspicion report json round trip") {
  auto r = detect(counts_of({4, 4, 5, 5, 5, 6, 120}));
  r.interval = {12.5, 22.5};
  nlohmann::json j = r;
  CHECK(j.at("stats").contains("M"));
  CHECK(j.at("interval").size() == 2);
  auto back = nlohmann::json::parse(j.dump()).get<SuspicionReport>();
  CHECK(back == r);
}

TEST_CASE("mad params validation") {
  CHECK_THROWS_AS(MadParams({0, 3}).validate(), ConfigError);
  CHECK_THROWS_AS(MadParams({1.4826, -1}).validate(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json({{"bee", 1}}).get<MadParams>(), ConfigError);
}
