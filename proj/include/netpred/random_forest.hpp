#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace netpred {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 6;
  std::size_t min_samples_split = 2;
  double bootstrap_fraction = 1.0;
  /// Candidate thresholds per feature; features with fewer distinct values
  /// are split exactly.
  std::size_t max_bins = 64;
  std::uint64_t seed = 0;
};

/// Bagged Gini decision trees with ceil(sqrt(F)) candidate features per split.
class RandomForest {
 public:
  /// Needs at least `min_samples` rows; throws DegenerateModelError when only one class is present.
  static RandomForest train(const Eigen::MatrixXd& X, std::span<const int> y,
                            const ForestConfig& config, std::size_t min_samples = 30);

  /// Majority vote over trees; a tied vote maps to +1.
  int predict(std::span<const double> x) const;
  double accuracy(const Eigen::MatrixXd& X, std::span<const int> y) const;
  std::size_t tree_count() const { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1, right = -1;
    int leaf_value = 1;
  };
  using Tree = std::vector<Node>;

  static int predict_tree(const Tree& tree, std::span<const double> x);

  std::vector<Tree> trees_;
  std::size_t dimension_ = 0;
};

}  // namespace netpred
