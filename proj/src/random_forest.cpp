#include "netpred/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netpred/errors.hpp"
#include "netpred/rng.hpp"

namespace netpred {
namespace {

// Per-feature candidate thresholds and the bin index of every training row:
// bin(x) = number of cuts strictly below x, so x <= cuts[b] iff bin(x) <= b.
struct BinnedData {
  std::vector<std::vector<double>> cuts;
  std::vector<std::vector<std::uint8_t>> bins;  // [feature][row]
};

BinnedData bin_features(const Eigen::MatrixXd& X, std::size_t max_bins) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto dim = static_cast<std::size_t>(X.cols());
  max_bins = std::clamp<std::size_t>(max_bins, 2, 255);
  BinnedData out;
  out.cuts.resize(dim);
  out.bins.assign(dim, std::vector<std::uint8_t>(n));
  std::vector<double> values(n);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) values[i] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    auto& cuts = out.cuts[j];
    if (sorted.size() <= max_bins) {
      for (std::size_t k = 1; k < sorted.size(); ++k) cuts.push_back(0.5 * (sorted[k - 1] + sorted[k]));
    } else {
      for (std::size_t b = 1; b < max_bins; ++b) {
        const std::size_t k = b * sorted.size() / max_bins;
        cuts.push_back(0.5 * (sorted[k - 1] + sorted[k]));
      }
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
    for (std::size_t i = 0; i < n; ++i)
      out.bins[j][i] = static_cast<std::uint8_t>(
          std::lower_bound(cuts.begin(), cuts.end(), values[i]) - cuts.begin());
  }
  return out;
}

struct Split {
  int feature = -1;
  std::size_t bin = 0;
  double impurity = 0.0;
};

}  // namespace

RandomForest RandomForest::train(const Eigen::MatrixXd& X, std::span<const int> y,
                                 const ForestConfig& config, std::size_t min_samples) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto dim = static_cast<std::size_t>(X.cols());
  if (y.size() != n) throw InputError("forest: feature/label count mismatch");
  if (n < min_samples)
    throw InsufficientHistoryError("forest: " + std::to_string(n) + " training rows, need " +
                                   std::to_string(min_samples));
  if (config.n_trees == 0 || dim == 0) throw InputError("forest: empty configuration");
  const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (positives == 0 || positives == n) throw DegenerateModelError("forest: single-class training set");

  const BinnedData data = bin_features(X, config.max_bins);
  const auto per_split = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));
  const auto sample_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.bootstrap_fraction * n)));

  RandomForest forest;
  forest.dimension_ = dim;
  forest.trees_.reserve(config.n_trees);
  std::vector<std::size_t> features(dim);
  std::vector<std::size_t> rows(sample_size);
  std::vector<double> pos_hist, neg_hist;

  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng(Rng::derive(config.seed, t));
    for (auto& r : rows) r = rng.index(n);
    Tree tree;

    struct Pending {
      std::size_t node, begin, end, depth;
    };
    std::vector<Pending> stack;
    tree.push_back({});
    stack.push_back({0, 0, rows.size(), 0});
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      std::size_t pos = 0;
      for (std::size_t k = p.begin; k < p.end; ++k) pos += y[rows[k]] == 1;
      const std::size_t count = p.end - p.begin;
      const std::size_t neg = count - pos;
      tree[p.node].leaf_value = pos >= neg ? 1 : -1;
      if (p.depth >= config.max_depth || pos == 0 || neg == 0 || count < config.min_samples_split)
        continue;

      std::iota(features.begin(), features.end(), 0);
      for (std::size_t k = 0; k < per_split; ++k) std::swap(features[k], features[k + rng.index(dim - k)]);

      const double parent = static_cast<double>(count) -
                            (static_cast<double>(pos * pos) + static_cast<double>(neg * neg)) / count;
      Split best;
      best.impurity = parent - 1e-12;
      for (std::size_t k = 0; k < per_split; ++k) {
        const std::size_t f = features[k];
        const auto& cuts = data.cuts[f];
        if (cuts.empty()) continue;
        pos_hist.assign(cuts.size() + 1, 0.0);
        neg_hist.assign(cuts.size() + 1, 0.0);
        for (std::size_t r = p.begin; r < p.end; ++r)
          (y[rows[r]] == 1 ? pos_hist : neg_hist)[data.bins[f][rows[r]]] += 1.0;
        double left_pos = 0.0, left_neg = 0.0;
        for (std::size_t b = 0; b < cuts.size(); ++b) {
          left_pos += pos_hist[b];
          left_neg += neg_hist[b];
          const double left = left_pos + left_neg;
          const double right = static_cast<double>(count) - left;
          if (left == 0.0 || right == 0.0) continue;
          const double right_pos = static_cast<double>(pos) - left_pos;
          const double right_neg = static_cast<double>(neg) - left_neg;
          // Weighted Gini: n_l * gini_l + n_r * gini_r
          const double impurity = left - (left_pos * left_pos + left_neg * left_neg) / left + right -
                                  (right_pos * right_pos + right_neg * right_neg) / right;
          if (impurity < best.impurity) best = {static_cast<int>(f), b, impurity};
        }
      }
      if (best.feature < 0) continue;

      const auto f = static_cast<std::size_t>(best.feature);
      const auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                             rows.begin() + static_cast<std::ptrdiff_t>(p.end),
                                             [&](std::size_t r) { return data.bins[f][r] <= best.bin; });
      const auto split_at = static_cast<std::size_t>(mid - rows.begin());
      const auto left = static_cast<std::int32_t>(tree.size());
      tree.push_back({});
      tree.push_back({});
      tree[p.node].feature = best.feature;
      tree[p.node].threshold = data.cuts[f][best.bin];
      tree[p.node].left = left;
      tree[p.node].right = left + 1;
      stack.push_back({static_cast<std::size_t>(left) + 1, split_at, p.end, p.depth + 1});
      stack.push_back({static_cast<std::size_t>(left), p.begin, split_at, p.depth + 1});
    }
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

int RandomForest::predict_tree(const Tree& tree, std::span<const double> x) {
  std::size_t node = 0;
  while (tree[node].feature >= 0)
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(tree[node].feature)] <= tree[node].threshold
                                        ? tree[node].left
                                        : tree[node].right);
  return tree[node].leaf_value;
}

int RandomForest::predict(std::span<const double> x) const {
  if (x.size() != dimension_) throw InputError("forest: feature dimension mismatch");
  int votes = 0;
  for (const auto& tree : trees_) votes += predict_tree(tree, x);
  return votes >= 0 ? 1 : -1;
}

double RandomForest::accuracy(const Eigen::MatrixXd& X, std::span<const int> y) const {
  if (y.empty()) throw InputError("forest: empty evaluation set");
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
    correct += predict(row) == y[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace netpred
