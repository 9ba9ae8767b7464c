#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace netpred {

/// exp(-gamma * |a - b|^2); gamma > 0.
double rbf_similarity(std::span<const double> a, std::span<const double> b, double gamma);

/// Bandwidth rule: 1 / median of pairwise squared distances between rows.
/// Falls back to the mean of the positive distances, then to 1.
double median_gamma(const Eigen::MatrixXd& points);

struct SimilarityEdge {
  std::size_t a = 0, b = 0;  // a < b, positions in `nodes`
  double similarity = 0.0;
};

struct SimilarityNetwork {
  std::vector<std::string> nodes;
  std::vector<SimilarityEdge> edges;  // sorted by (a, b)
  std::size_t k_neighbors = 0;
  double gamma = 1.0;

  Eigen::MatrixXd adjacency() const;
};

/// k-nearest-neighbour graph: each row is linked to its k most similar rows
/// (ties broken by node name), then the edge set is symmetrized by union.
/// `gamma` defaults to median_gamma(points).
SimilarityNetwork build_similarity_network(std::span<const std::string> nodes,
                                           const Eigen::MatrixXd& points, std::size_t k_neighbors,
                                           std::optional<double> gamma = std::nullopt);

/// I - D^{-1/2} W D^{-1/2}; isolated nodes get a unit diagonal entry.
Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& weights);

struct Eigenpairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // one column per value
};

/// The `count` smallest eigenpairs of a symmetric matrix.
Eigenpairs smallest_eigenpairs(const Eigen::MatrixXd& symmetric, std::size_t count);

struct KMeansConfig {
  std::size_t restarts = 50;
  std::size_t max_iterations = 100;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<std::size_t> labels;
  double inertia = 0.0;
};

/// Best-of-restarts Lloyd iterations with k-means++ seeding. Every cluster is
/// non-empty on return and cluster ids are numbered by first appearance.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, const KMeansConfig& config);

struct ClusterAssignment {
  std::vector<std::string> nodes;
  std::vector<std::size_t> cluster;  // parallel to nodes
  std::size_t k_clusters = 0;

  std::vector<std::vector<std::size_t>> members() const;
};

/// Normalized spectral clustering of a weighted graph: the `k` smallest
/// eigenvectors of the normalized Laplacian, row-normalized, clustered by k-means.
ClusterAssignment spectral_clustering(std::span<const std::string> nodes,
                                      const Eigen::MatrixXd& weights, std::size_t k,
                                      const KMeansConfig& config = {});
ClusterAssignment spectral_clustering(const SimilarityNetwork& network, std::size_t k,
                                      const KMeansConfig& config = {});

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

}  // namespace netpred
