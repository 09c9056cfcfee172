#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/gbdt.hpp"
#include "floodwatch/preprocess.hpp"

namespace floodwatch {

struct HeadConfig {
  std::size_t filters = 4;
  double learning_rate = 0.05;
  std::uint32_t epochs = 100;
  std::uint32_t batch_size = 64;
  std::uint64_t rng_seed = 7;

  void validate() const;
};

/// One-layer 1D convolution over the K*T tree-output vector (kernel T,
/// stride T, so window j sees only client j's trees), identity activation,
/// flatten in (filter, client) order, dense layer, sigmoid.
struct HeadWeights {
  std::size_t filters = 0;  // F
  std::size_t clients = 0;  // K
  std::size_t kernel = 0;   // T
  std::vector<double> conv_kernels;  // F x T, row-major
  std::vector<double> conv_bias;     // F
  std::vector<double> dense;         // F*K, index f*K + j
  double dense_bias = 0;

  std::size_t input_size() const { return clients * kernel; }
  std::size_t parameter_count() const;
  bool same_shape(const HeadWeights& other) const;
  /// Parameters in wire order: conv_kernels, conv_bias, dense, dense_bias.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> params);
  bool all_finite() const;

  friend bool operator==(const HeadWeights&, const HeadWeights&) = default;
};

/// Conv and dense weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
HeadWeights init(std::size_t k, std::size_t t, const HeadConfig& config);

double logit(const HeadWeights& w, std::span<const double> tree_vector);
/// Attack probability in (0,1).
double forward(const HeadWeights& w, std::span<const double> tree_vector);

/// Tree-output inputs and 0/1 targets for a batch of rows.
struct HeadBatch {
  std::size_t width = 0;
  std::vector<double> inputs;  // rows x width, row-major
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }
  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * width, width};
  }
};

HeadBatch make_batch(std::span<const FeatureRow> rows, std::span<const LocalEnsemble> ensembles);

/// Mean binary cross-entropy over the given sample indices (all when empty).
double loss(const HeadWeights& w, const HeadBatch& batch, std::span<const std::size_t> idx = {});
/// Analytic gradient of `loss`, shaped like the weights.
HeadWeights gradient(const HeadWeights& w, const HeadBatch& batch,
                     std::span<const std::size_t> idx = {});

/// Mini-batch SGD on binary cross-entropy. The ensembles are read only.
HeadWeights train_local(HeadWeights w, std::span<const FeatureRow> rows,
                        std::span<const LocalEnsemble> ensembles, const HeadConfig& config);
HeadWeights train_local(HeadWeights w, const HeadBatch& batch, const HeadConfig& config);

void to_json(nlohmann::json& j, const HeadWeights& w);
void from_json(const nlohmann::json& j, HeadWeights& w);
void to_json(nlohmann::json& j, const HeadConfig& c);
void from_json(const nlohmann::json& j, HeadConfig& c);

}  // namespace floodwatch
