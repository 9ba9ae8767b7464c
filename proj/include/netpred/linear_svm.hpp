#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>

namespace netpred {

struct SvmConfig {
  double C = 1.0;
  std::size_t max_epochs = 200;
  /// Stop once the projected-gradient spread of an epoch falls below this.
  double tolerance = 1e-2;
  std::uint64_t seed = 17;
};

/// Soft-margin linear SVM (hinge loss) trained by dual coordinate descent on
/// features standardized over the training set. The bias is learned as the
/// weight of a constant feature.
class LinearSvm {
 public:
  /// Throws DegenerateModelError unless each class has at least two examples.
  static LinearSvm train(const Eigen::MatrixXd& X, std::span<const int> y, const SvmConfig& config);

  double decision(std::span<const double> x) const;
  /// +1 / -1; a zero margin maps to +1.
  int predict(std::span<const double> x) const;
  double accuracy(const Eigen::MatrixXd& X, std::span<const int> y) const;
  std::size_t epochs_run() const { return epochs_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd inv_scale_;
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  std::size_t epochs_ = 0;
};

}  // namespace netpred
