#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/head.hpp"

using namespace floodwatch;

namespace {

HeadBatch random_batch(std::mt19937_64& gen, std::size_t width, std::size_t n) {
  HeadBatch b;
  b.width = width;
  std::normal_distribution<> d(0, 1);
  for (std::size_t i = 0; i < n * width; ++i) b.inputs.push_back(d(gen));
  for (std::size_t i = 0; i < n; ++i) b.targets.push_back(static_cast<double>(gen() % 2));
  return b;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 gen(31);
  const double h = 1e-5;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + gen() % 4, t = 1 + gen() % 4;
    HeadConfig cfg;
    cfg.filters = 1 + gen() % 4;
    cfg.rng_seed = gen();
    auto w = init(k, t, cfg);
    // Non-zero biases so every parameter is exercised.
    for (auto& b : w.conv_bias) b = std::uniform_real_distribution<>(-0.5, 0.5)(gen);
    w.dense_bias = 0.1;
    const auto batch = random_batch(gen, k * t, 1 + gen() % 16);
    const auto analytic = gradient(w, batch).flatten();
    auto params = w.flatten();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto plus = w, minus = w;
      auto p = params, m = params;
      p[i] += h;
      m[i] -= h;
      plus.assign_flat(p);
      minus.assign_flat(m);
      const double numeric = (loss(plus, batch) - loss(minus, batch)) / (2 * h);
      const double err = std::abs(numeric - analytic[i]) /
                         std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
      worst = std::max(worst, err);
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("init draws inside the fan-in bounds with zero biases") {
  HeadConfig cfg;
  auto w = init(5, 10, cfg);
  CHECK(w.parameter_count() == 4 * 10 + 4 + 4 * 5 + 1);
  for (double v : w.conv_kernels) CHECK(std::abs(v) <= 1 / std::sqrt(10.0));
  for (double v : w.dense) CHECK(std::abs(v) <= 1 / std::sqrt(20.0));
  for (double v : w.conv_bias) CHECK(v == 0.0);
  CHECK(w.dense_bias == 0.0);
  CHECK(init(5, 10, cfg) == w);
  CHECK_THROWS_AS(init(0, 10, cfg), DimensionError);
}

TEST_CASE("forward stays strictly inside (0,1)") {
  HeadConfig cfg;
  auto w = init(2, 3, cfg);
  std::vector<double> big(6, 1e6), small(6, -1e6);
  for (auto* x : {&big, &small}) {
    const double p = forward(w, *x);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  CHECK_THROWS_AS(forward(w, std::vector<double>(5)), DimensionError);
}

TEST_CASE("a zero head outputs one half") {
  HeadConfig cfg;
  auto w = init(3, 2, cfg);
  w.assign_flat(std::vector<double>(w.parameter_count(), 0.0));
  CHECK(forward(w, std::vector<double>(6, 3.0)) == 0.5);
}

TEST_CASE("local training lowers the loss; zero learning rate is a no-op") {
  std::mt19937_64 gen(4);
  HeadBatch b;
  b.width = 6;
  for (int i = 0; i < 200; ++i) {
    const bool pos = i % 4 == 0;
    for (int j = 0; j < 6; ++j) b.inputs.push_back((pos ? 1.0 : -1.0) + 0.1 * ((gen() % 11) - 5.0));
    b.targets.push_back(pos ? 1 : 0);
  }
  HeadConfig cfg;
  auto w0 = init(2, 3, cfg);
  auto w1 = train_local(w0, b, cfg);
  CHECK(loss(w1, b) < loss(w0, b));
  CHECK(w1.all_finite());
  cfg.learning_rate = 0;
  CHECK(train_local(w0, b, cfg) == w0);
  cfg.learning_rate = 0.05;
  cfg.epochs = 0;
  CHECK(train_local(w0, b, cfg) == w0);
}

TEST_CASE("weights json round trip is exact") {
  std::mt19937_64 gen(8);
  HeadConfig cfg;
  cfg.rng_seed = 99;
  auto w = init(7, 10, cfg);
  w.dense_bias = -0.123456789012345678;
  nlohmann::json j = w;
  auto back = nlohmann::json::parse(j.dump()).get<HeadWeights>();
  CHECK(back == w);
  j["dense"].erase(0);
  CHECK_THROWS_AS(j.get<HeadWeights>(), DimensionError);
}

TEST_CASE("flatten and assign are inverse") {
  HeadConfig cfg;
  auto w = init(3, 4, cfg);
  auto flat = w.flatten();
  for (auto& v : flat) v += 1;
  auto w2 = w;
  w2.assign_flat(flat);
  CHECK(w2.flatten() == flat);
  CHECK(w2.conv_kernels.front() == w.conv_kernels.front() + 1);
  CHECK_THROWS_AS(w2.assign_flat(std::vector<double>(3)), DimensionError);
}
