#include "netpred/state_clustering.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "netpred/errors.hpp"
#include "netpred/rng.hpp"

namespace netpred {

double rbf_similarity(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw InputError("rbf: dimension mismatch");
  if (!(gamma > 0.0)) throw InputError("rbf: gamma must be positive");
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
  return std::exp(-gamma * d2);
}

double median_gamma(const Eigen::MatrixXd& points) {
  std::vector<double> d2;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < points.rows(); ++j)
      d2.push_back((points.row(i) - points.row(j)).squaredNorm());
  if (d2.empty()) return 1.0;
  std::sort(d2.begin(), d2.end());
  const std::size_t m = d2.size();
  const double median = m % 2 ? d2[m / 2] : 0.5 * (d2[m / 2 - 1] + d2[m / 2]);
  if (median > 0.0) return 1.0 / median;
  double sum = 0.0;
  std::size_t positive = 0;
  for (double v : d2)
    if (v > 0.0) {
      sum += v;
      ++positive;
    }
  return positive ? static_cast<double>(positive) / sum : 1.0;
}

Eigen::MatrixXd SimilarityNetwork::adjacency() const {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges) {
    w(static_cast<Eigen::Index>(e.a), static_cast<Eigen::Index>(e.b)) = e.similarity;
    w(static_cast<Eigen::Index>(e.b), static_cast<Eigen::Index>(e.a)) = e.similarity;
  }
  return w;
}

SimilarityNetwork build_similarity_network(std::span<const std::string> nodes,
                                           const Eigen::MatrixXd& points, std::size_t k_neighbors,
                                           std::optional<double> gamma) {
  const std::size_t n = nodes.size();
  if (static_cast<std::size_t>(points.rows()) != n)
    throw InputError("similarity: one feature row per node required");
  if (k_neighbors == 0 || n < k_neighbors + 1)
    throw InputError("similarity: need more than k_neighbors stocks (have " + std::to_string(n) +
                     ", k = " + std::to_string(k_neighbors) + ")");
  SimilarityNetwork net;
  net.nodes.assign(nodes.begin(), nodes.end());
  net.k_neighbors = k_neighbors;
  net.gamma = gamma ? *gamma : median_gamma(points);
  if (!(net.gamma > 0.0)) throw InputError("similarity: gamma must be positive");

  Eigen::MatrixXd sim(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double s = std::max(std::exp(-net.gamma * (points.row(ii) - points.row(jj)).squaredNorm()),
                                std::numeric_limits<double>::min());
      sim(ii, jj) = sim(jj, ii) = s;
    }

  std::set<std::pair<std::size_t, std::size_t>> linked;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::erase(order, i);
    const auto row = static_cast<Eigen::Index>(i);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_neighbors),
                      order.end(), [&](std::size_t x, std::size_t y) {
                        const double sx = sim(row, static_cast<Eigen::Index>(x));
                        const double sy = sim(row, static_cast<Eigen::Index>(y));
                        if (sx != sy) return sx > sy;
                        return nodes[x] < nodes[y];
                      });
    for (std::size_t r = 0; r < k_neighbors; ++r)
      linked.emplace(std::min(i, order[r]), std::max(i, order[r]));
  }
  for (const auto& [a, b] : linked)
    net.edges.push_back({a, b, sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))});
  return net;
}

Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& weights) {
  const Eigen::Index n = weights.rows();
  if (weights.cols() != n) throw InputError("laplacian: adjacency must be square");
  const Eigen::VectorXd degree = weights.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  Eigen::MatrixXd laplacian = -(inv_sqrt.asDiagonal() * weights * inv_sqrt.asDiagonal());
  laplacian.diagonal().array() += 1.0;
  return 0.5 * (laplacian + laplacian.transpose());
}

Eigenpairs smallest_eigenpairs(const Eigen::MatrixXd& symmetric, std::size_t count) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
  if (solver.info() != Eigen::Success) throw InputError("eigendecomposition failed");
  const auto k = static_cast<Eigen::Index>(std::min<std::size_t>(count, symmetric.rows()));
  return {solver.eigenvalues().head(k), solver.eigenvectors().leftCols(k)};
}

namespace {

std::vector<std::size_t> relabel_by_first_appearance(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> ids;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = ids.try_emplace(labels[i], ids.size()).first->second;
  return out;
}

struct LloydRun {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centers;
  double inertia = std::numeric_limits<double>::infinity();
};

LloydRun lloyd(const Eigen::MatrixXd& points, std::size_t k, std::size_t max_iterations, Rng& rng) {
  const Eigen::Index n = points.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  LloydRun run;
  run.centers.resize(kk, points.cols());

  // k-means++ seeding
  run.centers.row(0) = points.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  Eigen::VectorXd nearest = (points.rowwise() - run.centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < kk; ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest(i);
        if (acc > target && nearest(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    run.centers.row(c) = points.row(pick);
    nearest = nearest.cwiseMin((points.rowwise() - run.centers.row(c)).rowwise().squaredNorm());
  }

  run.labels.assign(static_cast<std::size_t>(n), k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < kk; ++c) {
        const double d = (points.row(i) - run.centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      run.inertia += best_d;
      auto& label = run.labels[static_cast<std::size_t>(i)];
      if (label != static_cast<std::size_t>(best)) {
        label = static_cast<std::size_t>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kk, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(kk);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<Eigen::Index>(run.labels[static_cast<std::size_t>(i)]);
      sums.row(c) += points.row(i);
      counts(c) += 1.0;
    }
    for (Eigen::Index c = 0; c < kk; ++c)
      if (counts(c) > 0) run.centers.row(c) = sums.row(c) / counts(c);
  }
  return run;
}

void fill_empty_clusters(const Eigen::MatrixXd& points, std::size_t k, std::vector<std::size_t>& labels) {
  for (;;) {
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    const auto empty = std::find(sizes.begin(), sizes.end(), 0);
    if (empty == sizes.end()) return;
    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), points.cols());
    for (std::size_t i = 0; i < labels.size(); ++i)
      centers.row(static_cast<Eigen::Index>(labels[i])) += points.row(static_cast<Eigen::Index>(i));
    for (std::size_t c = 0; c < k; ++c)
      if (sizes[c]) centers.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    std::size_t move = labels.size();
    double farthest = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (sizes[labels[i]] < 2) continue;
      const double d = (points.row(static_cast<Eigen::Index>(i)) -
                        centers.row(static_cast<Eigen::Index>(labels[i])))
                           .squaredNorm();
      if (d > farthest) {
        farthest = d;
        move = i;
      }
    }
    labels[move] = static_cast<std::size_t>(empty - sizes.begin());
  }
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, const KMeansConfig& config) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0 || k > n) throw InputError("kmeans: cluster count must be in [1, points]");
  LloydRun best;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, config.restarts); ++r) {
    Rng rng(Rng::derive(config.seed, r));
    auto run = lloyd(points, k, config.max_iterations, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  fill_empty_clusters(points, k, best.labels);
  KMeansResult out;
  out.labels = relabel_by_first_appearance(best.labels);
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), points.cols());
  std::vector<double> sizes(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    centers.row(static_cast<Eigen::Index>(out.labels[i])) += points.row(static_cast<Eigen::Index>(i));
    sizes[out.labels[i]] += 1.0;
  }
  for (std::size_t c = 0; c < k; ++c) centers.row(static_cast<Eigen::Index>(c)) /= sizes[c];
  for (std::size_t i = 0; i < n; ++i)
    out.inertia += (points.row(static_cast<Eigen::Index>(i)) -
                    centers.row(static_cast<Eigen::Index>(out.labels[i])))
                       .squaredNorm();
  return out;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(k_clusters);
  for (std::size_t i = 0; i < cluster.size(); ++i) out[cluster[i]].push_back(i);
  return out;
}

ClusterAssignment spectral_clustering(std::span<const std::string> nodes,
                                      const Eigen::MatrixXd& weights, std::size_t k,
                                      const KMeansConfig& config) {
  const std::size_t n = nodes.size();
  if (static_cast<std::size_t>(weights.rows()) != n || static_cast<std::size_t>(weights.cols()) != n)
    throw InputError("spectral: adjacency size does not match node count");
  if (k == 0 || k > n)
    throw InputError("spectral: k_clusters (" + std::to_string(k) + ") must be in [1, " +
                     std::to_string(n) + "]");
  ClusterAssignment out;
  out.nodes.assign(nodes.begin(), nodes.end());
  out.k_clusters = k;
  if (k == 1) {
    out.cluster.assign(n, 0);
    return out;
  }
  const auto pairs = smallest_eigenpairs(normalized_laplacian(weights), k);
  Eigen::MatrixXd embedding = pairs.vectors;
  for (Eigen::Index i = 0; i < embedding.rows(); ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 1e-12) embedding.row(i) /= norm;
  }
  out.cluster = kmeans(embedding, k, config).labels;
  return out;
}

ClusterAssignment spectral_clustering(const SimilarityNetwork& network, std::size_t k,
                                      const KMeansConfig& config) {
  return spectral_clustering(network.nodes, network.adjacency(), k, config);
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw InputError("ari: label lengths differ");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto choose2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [key, v] : joint) index += choose2(v);
  for (const auto& [key, v] : rows) sum_rows += choose2(v);
  for (const auto& [key, v] : cols) sum_cols += choose2(v);
  const double expected = sum_rows * sum_cols / choose2(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace netpred
