#include <doctest.h>

#include <algorithm>
#include <random>

#include "floodwatch/balance.hpp"
#include "floodwatch/errors.hpp"

using namespace floodwatch;

namespace {

FeatureRow row(std::vector<double> f, bool positive, std::int64_t t = 0) {
  FeatureRow r;
  r.vehicle = VehicleId{1};
  r.t = t;
  r.features = std::move(f);
  r.label = positive ? Label::positive : Label::negative;
  return r;
}

std::vector<FeatureRow> dataset(std::size_t normal, std::size_t malicious, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<FeatureRow> rows;
  for (std::size_t i = 0; i < normal; ++i) {
    std::vector<double> f(10);
    for (auto& x : f) x = static_cast<double>(gen() % 4);
    rows.push_back(row(f, false, static_cast<std::int64_t>(i)));
  }
  for (std::size_t i = 0; i < malicious; ++i) {
    std::vector<double> f(10);
    for (auto& x : f) x = 80 + static_cast<double>(gen() % 40);
    rows.push_back(row(f, true, static_cast<std::int64_t>(normal + i)));
  }
  return rows;
}

}  // namespace

TEST_CASE("interpolation at one half gives the midpoint") {
  std::vector<double> a(10, 1.0), b(10, 3.0);
  CHECK(interpolate(a, b, 0.5) == std::vector<double>(10, 2.0));
  CHECK_THROWS_AS(interpolate(a, std::vector<double>(3), 0.5), DimensionError);
}

TEST_CASE("two minority points with k=1 interpolate between them") {
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 1000; ++i) rows.push_back(row(std::vector<double>(10, 0.0), false));
  rows.push_back(row(std::vector<double>(10, 1.0), true));
  rows.push_back(row(std::vector<double>(10, 3.0), true));
  auto out = smote(rows, BalanceConfig{10, 1}, 4);
  CHECK(out.synthetic_count == 98);
  for (std::size_t i = rows.size(); i < out.rows.size(); ++i) {
    const auto& f = out.rows[i].features;
    CHECK(out.rows[i].synthetic);
    CHECK(out.rows[i].positive());
    for (double x : f) {
      CHECK(x >= 1.0);
      CHECK(x <= 3.0);
      CHECK(x == f.front());  // stays on the diagonal segment
    }
  }
}

TEST_CASE("already balanced data is returned unchanged") {
  auto rows = dataset(100, 10, 1);
  auto out = smote(rows, BalanceConfig{294.12, 5}, 1);
  CHECK(out.rows == rows);
  CHECK(out.synthetic_count == 0);
}

TEST_CASE("2000 normal and 4 malicious rows reach the target ratio") {
  auto rows = dataset(2000, 4, 2);
  CHECK(synthetic_needed(2000, 4, 294.12) == 3);
  auto out = smote(rows, BalanceConfig{}, 9);
  CHECK(out.synthetic_count >= 3);
  const auto positives = std::count_if(out.rows.begin(), out.rows.end(),
                                       [](const FeatureRow& r) { return r.positive(); });
  CHECK(positives == 7);
  CHECK(2000.0 / static_cast<double>(positives) <= 294.12);
}

TEST_CASE("too few minority rows pass through with a warning") {
  auto none = dataset(500, 0, 3);
  auto out = smote(none, BalanceConfig{10, 5}, 1);
  CHECK(out.rows == none);
  CHECK(out.warning.has_value());
  auto one = dataset(500, 1, 3);
  out = smote(one, BalanceConfig{10, 5}, 1);
  CHECK(out.rows == one);
  CHECK(out.warning.has_value());
}

TEST_CASE("smote properties on random datasets") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t normal = 200 + gen() % 2000;
    const std::size_t malicious = 2 + gen() % 12;
    const double target = 5 + static_cast<double>(gen() % 300);
    const auto rows = dataset(normal, malicious, gen());
    const auto out = smote(rows, BalanceConfig{target, 5}, gen());
    // Originals untouched and first.
    REQUIRE(out.rows.size() >= rows.size());
    CHECK(std::equal(rows.begin(), rows.end(), out.rows.begin()));
    const auto positives = static_cast<double>(malicious + out.synthetic_count);
    CHECK(static_cast<double>(normal) / positives <= target);
    if (out.synthetic_count > 0)
      CHECK(static_cast<double>(normal) / (positives - 1) > target);
    // Each synthetic row is a convex combination of two minority parents.
    std::vector<const FeatureRow*> minority;
    for (const auto& r : rows)
      if (r.positive()) minority.push_back(&r);
    for (std::size_t i = rows.size(); i < out.rows.size(); ++i) {
      const auto& s = out.rows[i].features;
      bool found = false;
      for (auto* a : minority) {
        for (auto* b : minority) {
          if (a == b) continue;
          // lambda from the first coordinate where the parents differ
          double lambda = -1;
          for (std::size_t f = 0; f < s.size(); ++f)
            if (a->features[f] != b->features[f]) {
              lambda = (s[f] - a->features[f]) / (b->features[f] - a->features[f]);
              break;
            }
          if (lambda < -1e-12 || lambda > 1 + 1e-12) continue;
          bool ok = true;
          for (std::size_t f = 0; f < s.size() && ok; ++f)
            ok = std::abs(a->features[f] + lambda * (b->features[f] - a->features[f]) - s[f]) <
                 1e-9;
          if (ok) found = true;
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("smote is deterministic for a fixed seed") {
  const auto rows = dataset(1000, 5, 4);
  CHECK(smote(rows, BalanceConfig{50, 3}, 12).rows == smote(rows, BalanceConfig{50, 3}, 12).rows);
}

TEST_CASE("balance config validation") {
  CHECK_THROWS_AS(BalanceConfig({0.5, 5}).validate(), ConfigError);
  CHECK_THROWS_AS(BalanceConfig({10, 0}).validate(), ConfigError);
}
