#include "floodwatch/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"

namespace floodwatch {

void GbdtConfig::validate() const {
  if (trees_per_client < 1) throw ConfigError("gbdt: trees_per_client must be >= 1");
  if (max_depth < 1) throw ConfigError("gbdt: max_depth must be >= 1");
  if (!(shrinkage > 0 && shrinkage <= 1)) throw ConfigError("gbdt: shrinkage must lie in (0,1]");
  if (min_samples_leaf < 1) throw ConfigError("gbdt: min_samples_leaf must be >= 1");
  if (!(lambda_l2 >= 0)) throw ConfigError("gbdt: lambda_l2 must be >= 0");
}

double Tree::leaf_value(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                      : n.right);
  }
  return nodes[i].value;
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[i].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
    }
  }
  return deepest;
}

FeatureMatrix FeatureMatrix::from_rows(std::span<const FeatureRow> rows) {
  FeatureMatrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows.front().features.size();
  m.columns.assign(m.cols, std::vector<double>(m.rows));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].features.size() != m.cols)
      throw DimensionError("feature rows have inconsistent lengths");
    for (std::size_t f = 0; f < m.cols; ++f) m.columns[f][i] = rows[i].features[f];
  }
  return m;
}

namespace {

using SortedLists = std::vector<std::vector<std::size_t>>;

double score(double g, double h, double lambda) { return g * g / (h + lambda); }

std::optional<SplitCandidate> scan_splits(const FeatureMatrix& x, const SortedLists& sorted,
                                          std::span<const double> grad,
                                          std::span<const double> hess,
                                          const GbdtConfig& config) {
  const auto& any = sorted.front();
  const std::size_t n = any.size();
  double g_total = 0;
  double h_total = 0;
  for (auto i : any) {
    g_total += grad[i];
    h_total += hess[i];
  }
  const double parent = score(g_total, h_total, config.lambda_l2);
  const std::size_t min_leaf = config.min_samples_leaf;

  std::optional<SplitCandidate> best;
  for (std::size_t f = 0; f < x.cols; ++f) {
    const auto& order = sorted[f];
    const auto& col = x.columns[f];
    double gl = 0;
    double hl = 0;
    for (std::size_t k = 1; k < n; ++k) {
      gl += grad[order[k - 1]];
      hl += hess[order[k - 1]];
      const double lo = col[order[k - 1]];
      const double hi = col[order[k]];
      if (!(lo < hi)) continue;
      if (k < min_leaf || n - k < min_leaf) continue;
      const double gain = 0.5 * (score(gl, hl, config.lambda_l2) +
                                 score(g_total - gl, h_total - hl, config.lambda_l2) - parent);
      if (!(gain > kMinSplitGain)) continue;
      if (!best || gain > best->gain + kGainTieTolerance * std::max(1.0, std::abs(best->gain)))
        best = SplitCandidate{f, 0.5 * (lo + hi), gain};
    }
  }
  return best;
}

SortedLists sort_rows(const FeatureMatrix& x, std::span<const std::size_t> rows) {
  SortedLists lists(x.cols);
  for (std::size_t f = 0; f < x.cols; ++f) {
    auto& l = lists[f];
    l.assign(rows.begin(), rows.end());
    const auto& col = x.columns[f];
    std::sort(l.begin(), l.end(), [&col](std::size_t a, std::size_t b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
  }
  return lists;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> grad, std::span<const double> hess,
              const GbdtConfig& config)
      : x_(x), grad_(grad), hess_(hess), config_(config) {}

  Tree build(SortedLists lists) {
    tree_.nodes.clear();
    grow(std::move(lists), 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(SortedLists lists, std::uint32_t depth) {
    const auto index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::optional<SplitCandidate> split;
    if (depth < config_.max_depth && lists.front().size() >= 2 * config_.min_samples_leaf)
      split = scan_splits(x_, lists, grad_, hess_, config_);

    if (!split) {
      double g = 0;
      double h = 0;
      for (auto i : lists.front()) {
        g += grad_[i];
        h += hess_[i];
      }
      tree_.nodes[static_cast<std::size_t>(index)].value = -g / (h + config_.lambda_l2);
      return index;
    }

    const auto& col = x_.columns[split->feature];
    SortedLists left(lists.size());
    SortedLists right(lists.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
      for (auto i : lists[f]) (col[i] < split->threshold ? left[f] : right[f]).push_back(i);
    }
    lists.clear();
    auto l = grow(std::move(left), depth + 1);
    auto r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  const FeatureMatrix& x_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const GbdtConfig& config_;
  Tree tree_;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::optional<SplitCandidate> find_best_split(const FeatureMatrix& x,
                                              std::span<const std::size_t> rows,
                                              std::span<const double> grad,
                                              std::span<const double> hess,
                                              const GbdtConfig& config) {
  if (rows.size() < 2 || x.cols == 0) return std::nullopt;
  return scan_splits(x, sort_rows(x, rows), grad, hess, config);
}

LocalEnsemble train(std::span<const FeatureRow> rows, const GbdtConfig& config, ClientId client) {
  config.validate();
  if (rows.empty()) throw DomainError("gbdt: cannot train on an empty dataset");
  auto x = FeatureMatrix::from_rows(rows);

  const auto n = rows.size();
  const auto positives = static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const FeatureRow& r) { return r.positive(); }));
  double prevalence = static_cast<double>(positives) / static_cast<double>(n);
  prevalence = std::clamp(prevalence, kPrevalenceClamp, 1 - kPrevalenceClamp);

  LocalEnsemble ensemble;
  ensemble.client = client;
  ensemble.base_score = std::log(prevalence / (1 - prevalence));
  ensemble.shrinkage = config.shrinkage;
  ensemble.max_depth = config.max_depth;
  ensemble.num_features = x.cols;

  if (positives == 0 || positives == n) {
    Tree stump;
    stump.nodes.push_back(TreeNode{});
    ensemble.trees.assign(config.trees_per_client, stump);
    return ensemble;
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto presorted = sort_rows(x, all);

  std::vector<double> margin(n, ensemble.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  for (std::uint32_t t = 0; t < config.trees_per_client; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - (rows[i].positive() ? 1.0 : 0.0);
      hess[i] = p * (1 - p);
    }
    TreeBuilder builder(x, grad, hess, config);
    Tree tree = builder.build(presorted);
    for (std::size_t i = 0; i < n; ++i)
      margin[i] += config.shrinkage * tree.leaf_value(rows[i].features);
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

double predict_margin(const LocalEnsemble& ensemble, std::span<const double> features) {
  if (features.size() != ensemble.num_features)
    throw DimensionError("gbdt: expected " + std::to_string(ensemble.num_features) +
                         " features, got " + std::to_string(features.size()));
  double sum = 0;
  for (const auto& tree : ensemble.trees) sum += tree.leaf_value(features);
  return ensemble.base_score + ensemble.shrinkage * sum;
}

void per_tree_outputs_into(std::span<const LocalEnsemble> sorted_ensembles,
                           std::span<const double> features, std::span<double> out) {
  std::size_t k = 0;
  for (const auto& e : sorted_ensembles)
    for (const auto& tree : e.trees) out[k++] = e.shrinkage * tree.leaf_value(features);
}

std::vector<double> per_tree_outputs(std::span<const LocalEnsemble> ensembles,
                                     std::span<const double> features) {
  if (ensembles.empty()) return {};
  const auto t = ensembles.front().trees.size();
  for (const auto& e : ensembles) {
    if (e.trees.size() != t) throw DimensionError("gbdt: ensembles have different tree counts");
    if (e.num_features != features.size())
      throw DimensionError("gbdt: expected " + std::to_string(e.num_features) +
                           " features, got " + std::to_string(features.size()));
  }
  std::vector<const LocalEnsemble*> order;
  for (const auto& e : ensembles) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const LocalEnsemble* a, const LocalEnsemble* b) { return a->client < b->client; });
  std::vector<double> out;
  out.reserve(ensembles.size() * t);
  for (const auto* e : order)
    for (const auto& tree : e->trees) out.push_back(e->shrinkage * tree.leaf_value(features));
  return out;
}

double mean_logistic_loss(std::span<const double> margins, std::span<const FeatureRow> rows) {
  double total = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double z = margins[i];
    // log(1 + exp(-z)) for positives, log(1 + exp(z)) for negatives, overflow-safe.
    const double s = rows[i].positive() ? -z : z;
    total += s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
  }
  return total / static_cast<double>(rows.size());
}

// --- serialization ------------------------------------------------------

namespace {

nlohmann::json node_to_json(const Tree& tree, std::size_t i) {
  const auto& n = tree.nodes[i];
  if (n.is_leaf()) return {{"v", n.value}};
  return {{"f", n.feature},
          {"t", n.threshold},
          {"l", node_to_json(tree, static_cast<std::size_t>(n.left))},
          {"r", node_to_json(tree, static_cast<std::size_t>(n.right))}};
}

std::int32_t node_from_json(const nlohmann::json& j, Tree& tree) {
  const auto index = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("v")) {
    tree.nodes.back().value = j.at("v").get<double>();
    return index;
  }
  TreeNode node;
  node.feature = j.at("f").get<std::int32_t>();
  if (node.feature < 0) throw DimensionError("gbdt: negative feature index in tree payload");
  node.threshold = j.at("t").get<double>();
  node.left = node_from_json(j.at("l"), tree);
  node.right = node_from_json(j.at("r"), tree);
  tree.nodes[static_cast<std::size_t>(index)] = node;
  return index;
}

}  // namespace

void to_json(nlohmann::json& j, const Tree& tree) { j = node_to_json(tree, 0); }

void from_json(const nlohmann::json& j, Tree& tree) {
  tree.nodes.clear();
  node_from_json(j, tree);
}

void to_json(nlohmann::json& j, const LocalEnsemble& e) {
  j = {{"cid", raw(e.client)},
       {"base_score", e.base_score},
       {"shrinkage", e.shrinkage},
       {"max_depth", e.max_depth},
       {"num_features", e.num_features},
       {"trees", e.trees}};
}

void from_json(const nlohmann::json& j, LocalEnsemble& e) {
  e.client = ClientId{j.at("cid").get<std::uint32_t>()};
  e.base_score = j.at("base_score").get<double>();
  e.shrinkage = j.at("shrinkage").get<double>();
  e.max_depth = j.at("max_depth").get<std::uint32_t>();
  e.num_features = j.at("num_features").get<std::size_t>();
  e.trees = j.at("trees").get<std::vector<Tree>>();
  for (const auto& tree : e.trees)
    for (const auto& n : tree.nodes)
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= e.num_features)
        throw DimensionError("gbdt: tree feature index out of range");
}

void to_json(nlohmann::json& j, const GbdtConfig& c) {
  j = {{"trees_per_client", c.trees_per_client},
       {"max_depth", c.max_depth},
       {"shrinkage", c.shrinkage},
       {"min_samples_leaf", c.min_samples_leaf},
       {"lambda_l2", c.lambda_l2}};
}

void from_json(const nlohmann::json& j, GbdtConfig& c) {
  c.trees_per_client = j.value("trees_per_client", c.trees_per_client);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.shrinkage = j.value("shrinkage", c.shrinkage);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  c.lambda_l2 = j.value("lambda_l2", c.lambda_l2);
}

}  // namespace floodwatch
