#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/ids.hpp"
#include "floodwatch/preprocess.hpp"

namespace floodwatch {

struct GbdtConfig {
  std::uint32_t trees_per_client = 10;
  std::uint32_t max_depth = 3;
  double shrinkage = 0.3;
  std::uint32_t min_samples_leaf = 1;
  double lambda_l2 = 1.0;

  void validate() const;
};

// Splits whose gain does not exceed this are not taken.
inline constexpr double kMinSplitGain = 1e-12;
// Two gains closer than this (relative) count as a tie; the earlier
// candidate in (feature, threshold) order wins.
inline constexpr double kGainTieTolerance = 1e-9;
// Single-class fallback clamps the prevalence into [eps, 1 - eps].
inline constexpr double kPrevalenceClamp = 1e-6;

/// Internal nodes route `x[feature] < threshold` to the left child.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0;
  double value = 0;  // leaf value before shrinkage
  std::int32_t left = -1;
  std::int32_t right = -1;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double leaf_value(std::span<const double> x) const;
  std::size_t depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct LocalEnsemble {
  ClientId client{};
  std::vector<Tree> trees;
  double base_score = 0;
  double shrinkage = 1;
  std::uint32_t max_depth = 0;
  std::size_t num_features = 0;

  friend bool operator==(const LocalEnsemble&, const LocalEnsemble&) = default;
};

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0;
  double gain = 0;
};

/// Column-major copy of row features, shared by training and split search.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> columns;

  static FeatureMatrix from_rows(std::span<const FeatureRow> rows);
  double at(std::size_t row, std::size_t col) const { return columns[col][row]; }
};

/// Second-order gain of splitting `rows` at the best (feature, midpoint);
/// nullopt when no admissible split has gain above kMinSplitGain.
std::optional<SplitCandidate> find_best_split(const FeatureMatrix& x,
                                              std::span<const std::size_t> rows,
                                              std::span<const double> grad,
                                              std::span<const double> hess,
                                              const GbdtConfig& config);

LocalEnsemble train(std::span<const FeatureRow> rows, const GbdtConfig& config,
                    ClientId client = ClientId{0});

double predict_margin(const LocalEnsemble& ensemble, std::span<const double> features);

/// Shrunken leaf value of every tree, in (client id, tree) order. Ensembles
/// are sorted by client id first, so input order does not matter.
std::vector<double> per_tree_outputs(std::span<const LocalEnsemble> ensembles,
                                     std::span<const double> features);
/// Hot-path variant: ensembles must already be sorted and `out` sized K*T.
void per_tree_outputs_into(std::span<const LocalEnsemble> sorted_ensembles,
                           std::span<const double> features, std::span<double> out);

double mean_logistic_loss(std::span<const double> margins, std::span<const FeatureRow> rows);

void to_json(nlohmann::json& j, const Tree& tree);
void from_json(const nlohmann::json& j, Tree& tree);
void to_json(nlohmann::json& j, const LocalEnsemble& ensemble);
void from_json(const nlohmann::json& j, LocalEnsemble& ensemble);
void to_json(nlohmann::json& j, const GbdtConfig& config);
void from_json(const nlohmann::json& j, GbdtConfig& config);

}  // namespace floodwatch
