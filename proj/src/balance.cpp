#include "floodwatch/balance.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/log.hpp"
#include "floodwatch/rng.hpp"

namespace floodwatch {

void BalanceConfig::validate() const {
  if (!(target_ratio >= 1)) throw ConfigError("balance: target_ratio must be >= 1");
  if (k_neighbors < 1) throw ConfigError("balance: k_neighbors must be >= 1");
}

std::size_t synthetic_needed(std::size_t majority, std::size_t minority, double target_ratio) {
  if (majority == 0) return 0;
  const auto wanted =
      static_cast<std::size_t>(std::ceil(static_cast<double>(majority) / target_ratio));
  return wanted > minority ? wanted - minority : 0;
}

std::vector<double> interpolate(std::span<const double> x, std::span<const double> neighbor,
                                double lambda) {
  if (x.size() != neighbor.size()) throw DimensionError("balance: feature length mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + lambda * (neighbor[i] - x[i]);
  return out;
}

SmoteResult smote(std::span<const FeatureRow> rows, const BalanceConfig& config,
                  std::uint64_t seed) {
  config.validate();
  SmoteResult result;
  result.rows.assign(rows.begin(), rows.end());

  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].positive()) minority.push_back(i);
  const std::size_t majority = rows.size() - minority.size();

  const auto needed = synthetic_needed(majority, minority.size(), config.target_ratio);
  if (needed == 0) return result;
  if (minority.size() < 2) {
    result.warning = "smote: " + std::to_string(minority.size()) +
                     " minority rows, need at least 2 to interpolate; rows passed through";
    logger()->warn("{}", *result.warning);
    return result;
  }

  const std::size_t k = std::min<std::size_t>(config.k_neighbors, minority.size() - 1);
  std::vector<std::vector<std::size_t>> neighbors(minority.size());
  for (std::size_t a = 0; a < minority.size(); ++a) {
    std::vector<std::pair<double, std::size_t>> dist;
    const auto& xa = rows[minority[a]].features;
    for (std::size_t b = 0; b < minority.size(); ++b) {
      if (a == b) continue;
      const auto& xb = rows[minority[b]].features;
      double d = 0;
      for (std::size_t f = 0; f < xa.size(); ++f) d += (xa[f] - xb[f]) * (xa[f] - xb[f]);
      dist.emplace_back(d, b);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t i = 0; i < k; ++i) neighbors[a].push_back(dist[i].second);
  }

  Rng rng(seed);
  for (std::size_t s = 0; s < needed; ++s) {
    const auto base = rng.below(minority.size());
    const auto other = neighbors[base][rng.below(k)];
    const auto& parent = rows[minority[base]];
    FeatureRow synth;
    synth.vehicle = parent.vehicle;
    synth.t = parent.t;
    synth.features = interpolate(parent.features, rows[minority[other]].features, rng.uniform());
    synth.label = Label::positive;
    synth.synthetic = true;
    result.rows.push_back(std::move(synth));
  }
  result.synthetic_count = needed;
  return result;
}

void to_json(nlohmann::json& j, const BalanceConfig& c) {
  j = {{"target_ratio", c.target_ratio}, {"k_neighbors", c.k_neighbors}};
}

void from_json(const nlohmann::json& j, BalanceConfig& c) {
  c.target_ratio = j.value("target_ratio", c.target_ratio);
  c.k_neighbors = j.value("k_neighbors", c.k_neighbors);
}

}  // namespace floodwatch
