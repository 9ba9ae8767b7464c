#include "netpred/linear_svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "netpred/errors.hpp"
#include "netpred/rng.hpp"

namespace netpred {

LinearSvm LinearSvm::train(const Eigen::MatrixXd& X, std::span<const int> y, const SvmConfig& config) {
  const Eigen::Index n = X.rows();
  const Eigen::Index dim = X.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw InputError("svm: feature/label count mismatch");
  const auto positives = std::count(y.begin(), y.end(), 1);
  if (positives < 2 || n - positives < 2)
    throw DegenerateModelError("svm: training set needs at least two examples of each class");

  LinearSvm model;
  model.mean_ = X.colwise().mean().transpose();
  model.inv_scale_.resize(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double var = (X.col(j).array() - model.mean_(j)).square().mean();
    model.inv_scale_(j) = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
  // Standardized samples with a trailing constant column for the bias.
  Eigen::MatrixXd Z(dim + 1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Z.col(i).head(dim) = (X.row(i).transpose() - model.mean_).cwiseProduct(model.inv_scale_);
    Z(dim, i) = 1.0;
  }
  const Eigen::VectorXd q = Z.colwise().squaredNorm().transpose();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim + 1);
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);

  std::size_t epoch = 0;
  while (epoch < config.max_epochs) {
    ++epoch;
    rng.shuffle(std::span<std::size_t>(order));
    double pg_max = -INFINITY, pg_min = INFINITY;
    for (std::size_t i : order) {
      const auto col = static_cast<Eigen::Index>(i);
      const double yi = y[i];
      const double g = yi * w.dot(Z.col(col)) - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] == config.C) pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) > 1e-12) {
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / q(col), 0.0, config.C);
        w += (alpha[i] - old) * yi * Z.col(col);
      }
    }
    if (pg_max - pg_min < config.tolerance) break;
  }
  model.weights_ = w.head(dim);
  model.bias_ = w(dim);
  model.epochs_ = epoch;
  return model;
}

double LinearSvm::decision(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != weights_.size())
    throw InputError("svm: feature dimension mismatch");
  double s = bias_;
  for (Eigen::Index j = 0; j < weights_.size(); ++j)
    s += weights_(j) * (x[static_cast<std::size_t>(j)] - mean_(j)) * inv_scale_(j);
  return s;
}

int LinearSvm::predict(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : -1; }

double LinearSvm::accuracy(const Eigen::MatrixXd& X, std::span<const int> y) const {
  if (y.empty()) throw InputError("svm: empty evaluation set");
  std::size_t correct = 0;
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
    correct += predict(row) == y[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace netpred
