#include "floodwatch/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/rng.hpp"

namespace floodwatch {

void HeadConfig::validate() const {
  if (filters < 1) throw ConfigError("head: filters must be >= 1");
  if (!(learning_rate >= 0)) throw ConfigError("head: learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("head: batch_size must be >= 1");
}

std::size_t HeadWeights::parameter_count() const {
  return conv_kernels.size() + conv_bias.size() + dense.size() + 1;
}

bool HeadWeights::same_shape(const HeadWeights& o) const {
  return filters == o.filters && clients == o.clients && kernel == o.kernel &&
         conv_kernels.size() == o.conv_kernels.size() && conv_bias.size() == o.conv_bias.size() &&
         dense.size() == o.dense.size();
}

std::vector<double> HeadWeights::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  out.insert(out.end(), conv_kernels.begin(), conv_kernels.end());
  out.insert(out.end(), conv_bias.begin(), conv_bias.end());
  out.insert(out.end(), dense.begin(), dense.end());
  out.push_back(dense_bias);
  return out;
}

void HeadWeights::assign_flat(std::span<const double> p) {
  if (p.size() != parameter_count()) throw DimensionError("head: flat parameter size mismatch");
  auto it = p.begin();
  std::copy_n(it, conv_kernels.size(), conv_kernels.begin());
  it += static_cast<std::ptrdiff_t>(conv_kernels.size());
  std::copy_n(it, conv_bias.size(), conv_bias.begin());
  it += static_cast<std::ptrdiff_t>(conv_bias.size());
  std::copy_n(it, dense.size(), dense.begin());
  it += static_cast<std::ptrdiff_t>(dense.size());
  dense_bias = *it;
}

bool HeadWeights::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(conv_kernels.begin(), conv_kernels.end(), finite) &&
         std::all_of(conv_bias.begin(), conv_bias.end(), finite) &&
         std::all_of(dense.begin(), dense.end(), finite) && std::isfinite(dense_bias);
}

HeadWeights init(std::size_t k, std::size_t t, const HeadConfig& config) {
  config.validate();
  if (k < 1 || t < 1) throw DimensionError("head: K and T must be >= 1");
  HeadWeights w;
  w.filters = config.filters;
  w.clients = k;
  w.kernel = t;
  Rng rng(config.rng_seed);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(t));
  const double dense_bound = 1.0 / std::sqrt(static_cast<double>(config.filters * k));
  w.conv_kernels.resize(config.filters * t);
  for (auto& v : w.conv_kernels) v = rng.uniform(-conv_bound, conv_bound);
  w.conv_bias.assign(config.filters, 0.0);
  w.dense.resize(config.filters * k);
  for (auto& v : w.dense) v = rng.uniform(-dense_bound, dense_bound);
  return w;
}

namespace {

// Fills act (F*K, index f*K + j) and returns the pre-sigmoid output.
double forward_into(const HeadWeights& w, const double* x, double* act) {
  const std::size_t F = w.filters, K = w.clients, T = w.kernel;
  double z = w.dense_bias;
  for (std::size_t j = 0; j < K; ++j) {
    const double* xj = x + j * T;
    for (std::size_t f = 0; f < F; ++f) {
      const double* kf = w.conv_kernels.data() + f * T;
      double a = w.conv_bias[f];
      for (std::size_t t = 0; t < T; ++t) a += kf[t] * xj[t];
      act[f * K + j] = a;
      z += w.dense[f * K + j] * a;
    }
  }
  return z;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(s)) without overflow.
double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

void check_input(const HeadWeights& w, std::size_t n) {
  if (n != w.input_size())
    throw DimensionError("head: expected input of length " + std::to_string(w.input_size()) +
                         ", got " + std::to_string(n));
}

struct GradientBuffer {
  std::vector<double> kernels, conv_bias, dense, act;
  double dense_bias = 0;

  explicit GradientBuffer(const HeadWeights& w)
      : kernels(w.conv_kernels.size()),
        conv_bias(w.conv_bias.size()),
        dense(w.dense.size()),
        act(w.filters * w.clients) {}

  void clear() {
    std::fill(kernels.begin(), kernels.end(), 0.0);
    std::fill(conv_bias.begin(), conv_bias.end(), 0.0);
    std::fill(dense.begin(), dense.end(), 0.0);
    dense_bias = 0;
  }
};

void accumulate(const HeadWeights& w, const double* x, double target, GradientBuffer& g) {
  const std::size_t F = w.filters, K = w.clients, T = w.kernel;
  const double e = sigmoid(forward_into(w, x, g.act.data())) - target;
  g.dense_bias += e;
  for (std::size_t j = 0; j < K; ++j) {
    const double* xj = x + j * T;
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t fk = f * K + j;
      g.dense[fk] += e * g.act[fk];
      const double da = e * w.dense[fk];
      g.conv_bias[f] += da;
      double* gk = g.kernels.data() + f * T;
      for (std::size_t t = 0; t < T; ++t) gk[t] += da * xj[t];
    }
  }
}

std::vector<std::size_t> all_indices(const HeadBatch& batch, std::span<const std::size_t> idx) {
  if (!idx.empty()) return {idx.begin(), idx.end()};
  std::vector<std::size_t> out(batch.size());
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace

double logit(const HeadWeights& w, std::span<const double> x) {
  check_input(w, x.size());
  std::vector<double> act(w.filters * w.clients);
  return forward_into(w, x.data(), act.data());
}

double forward(const HeadWeights& w, std::span<const double> x) {
  const double p = sigmoid(logit(w, x));
  // Keep the probability strictly inside (0,1) even when exp saturates.
  return std::clamp(p, 0x1.0p-60, 1.0 - 0x1.0p-53);
}

HeadBatch make_batch(std::span<const FeatureRow> rows, std::span<const LocalEnsemble> ensembles) {
  std::vector<LocalEnsemble> sorted(ensembles.begin(), ensembles.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const LocalEnsemble& a, const LocalEnsemble& b) { return a.client < b.client; });
  HeadBatch batch;
  if (sorted.empty()) throw DimensionError("head: no tree ensembles to evaluate");
  const auto t = sorted.front().trees.size();
  for (const auto& e : sorted)
    if (e.trees.size() != t) throw DimensionError("gbdt: ensembles have different tree counts");
  batch.width = sorted.size() * t;
  batch.inputs.resize(rows.size() * batch.width);
  batch.targets.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].features.size() != sorted.front().num_features)
      throw DimensionError("head: feature row length does not match the ensembles");
    per_tree_outputs_into(sorted, rows[i].features, {batch.inputs.data() + i * batch.width, batch.width});
    batch.targets.push_back(rows[i].positive() ? 1.0 : 0.0);
  }
  return batch;
}

double loss(const HeadWeights& w, const HeadBatch& batch, std::span<const std::size_t> idx) {
  check_input(w, batch.width);
  const auto samples = all_indices(batch, idx);
  std::vector<double> act(w.filters * w.clients);
  double total = 0;
  for (auto i : samples) {
    const double z = forward_into(w, batch.inputs.data() + i * batch.width, act.data());
    total += batch.targets[i] * softplus(-z) + (1 - batch.targets[i]) * softplus(z);
  }
  return total / static_cast<double>(samples.size());
}

HeadWeights gradient(const HeadWeights& w, const HeadBatch& batch,
                     std::span<const std::size_t> idx) {
  check_input(w, batch.width);
  const auto samples = all_indices(batch, idx);
  GradientBuffer g(w);
  for (auto i : samples) accumulate(w, batch.inputs.data() + i * batch.width, batch.targets[i], g);
  const double inv = 1.0 / static_cast<double>(samples.size());
  HeadWeights out = w;
  for (std::size_t i = 0; i < g.kernels.size(); ++i) out.conv_kernels[i] = g.kernels[i] * inv;
  for (std::size_t i = 0; i < g.conv_bias.size(); ++i) out.conv_bias[i] = g.conv_bias[i] * inv;
  for (std::size_t i = 0; i < g.dense.size(); ++i) out.dense[i] = g.dense[i] * inv;
  out.dense_bias = g.dense_bias * inv;
  return out;
}

HeadWeights train_local(HeadWeights w, const HeadBatch& batch, const HeadConfig& config) {
  config.validate();
  check_input(w, batch.width);
  if (batch.size() == 0) throw DomainError("head: cannot train on an empty dataset");
  if (config.learning_rate == 0 || config.epochs == 0) return w;

  Rng rng(config.rng_seed);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  GradientBuffer g(w);
  const double lr = config.learning_rate;
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      g.clear();
      for (std::size_t k = start; k < end; ++k)
        accumulate(w, batch.inputs.data() + order[k] * batch.width, batch.targets[order[k]], g);
      const double step = lr / static_cast<double>(end - start);
      for (std::size_t i = 0; i < g.kernels.size(); ++i) w.conv_kernels[i] -= step * g.kernels[i];
      for (std::size_t i = 0; i < g.conv_bias.size(); ++i) w.conv_bias[i] -= step * g.conv_bias[i];
      for (std::size_t i = 0; i < g.dense.size(); ++i) w.dense[i] -= step * g.dense[i];
      w.dense_bias -= step * g.dense_bias;
    }
  }
  return w;
}

HeadWeights train_local(HeadWeights w, std::span<const FeatureRow> rows,
                        std::span<const LocalEnsemble> ensembles, const HeadConfig& config) {
  if (rows.empty()) throw DomainError("head: cannot train on an empty dataset");
  return train_local(std::move(w), make_batch(rows, ensembles), config);
}

void to_json(nlohmann::json& j, const HeadWeights& w) {
  j = {{"filters", w.filters},       {"clients", w.clients},     {"kernel", w.kernel},
       {"conv_kernels", w.conv_kernels}, {"conv_bias", w.conv_bias}, {"dense", w.dense},
       {"dense_bias", w.dense_bias}};
}

void from_json(const nlohmann::json& j, HeadWeights& w) {
  w.filters = j.at("filters").get<std::size_t>();
  w.clients = j.at("clients").get<std::size_t>();
  w.kernel = j.at("kernel").get<std::size_t>();
  w.conv_kernels = j.at("conv_kernels").get<std::vector<double>>();
  w.conv_bias = j.at("conv_bias").get<std::vector<double>>();
  w.dense = j.at("dense").get<std::vector<double>>();
  w.dense_bias = j.at("dense_bias").get<double>();
  if (w.conv_kernels.size() != w.filters * w.kernel || w.conv_bias.size() != w.filters ||
      w.dense.size() != w.filters * w.clients)
    throw DimensionError("head: weight arrays do not match the declared (F, K, T) shape");
}

void to_json(nlohmann::json& j, const HeadConfig& c) {
  j = {{"filters", c.filters},
       {"learning_rate", c.learning_rate},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, HeadConfig& c) {
  c.filters = j.value("filters", c.filters);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
}

}  // namespace floodwatch
