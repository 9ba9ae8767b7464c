#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netpred/market_data.hpp"
#include "netpred/relations.hpp"

namespace netpred {

/// Output class order: class 0 is a rise, class 1 a fall.
inline constexpr std::size_t kRiseClass = 0;
inline constexpr std::size_t kFallClass = 1;
inline constexpr std::size_t kClassCount = 2;

inline std::size_t class_of(Movement m) { return m == Movement::Rise ? kRiseClass : kFallClass; }

struct GcnParams {
  Eigen::MatrixXd W0;  // features x hidden
  Eigen::MatrixXd W1;  // hidden x classes
  bool operator==(const GcnParams& other) const { return W0 == other.W0 && W1 == other.W1; }
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  double dropout_rate = 0.5;
  double l2_coefficient = 5e-4;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t hidden_channels = 4;

  /// Throws InputError on a non-positive learning rate, a dropout outside
  /// [0, 1) or zero epochs.
  void validate() const;
};

struct NormalizedAdjacency {
  Eigen::MatrixXd matrix;
};

/// D^{-1/2} (A + I) D^{-1/2} with negative weights of A clamped to 0.
NormalizedAdjacency normalized_adjacency(const Eigen::MatrixXd& weights);
/// Over the stock nodes of the network, in stock_nodes order.
NormalizedAdjacency normalized_adjacency(const PredictionNetwork& network);
/// Dense symmetric stock-stock weight matrix of the network.
Eigen::MatrixXd stock_weight_matrix(const PredictionNetwork& network);

/// softmax(A relu(A X W0) W1), row-wise. `hidden_mask`, when given, multiplies
/// the hidden activation element-wise (inverted dropout).
Eigen::MatrixXd gcn_forward(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X,
                            const GcnParams& params, const Eigen::MatrixXd* hidden_mask = nullptr);

/// Labelled rows and their class ids.
struct SeedTargets {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> classes;

  std::size_t size() const { return rows.size(); }
  bool single_class() const;
};

SeedTargets seed_targets(const std::vector<std::string>& nodes,
                         const std::map<std::string, Movement>& labels);

/// -sum over seeds of ln max(Y[row, class], 1e-12) + l2 (|W0|^2 + |W1|^2) / 2.
double masked_cross_entropy(const Eigen::MatrixXd& Y, const SeedTargets& targets,
                            double l2_coefficient, const GcnParams& params);

struct LossGradients {
  double loss = 0.0;
  Eigen::MatrixXd dW0;
  Eigen::MatrixXd dW1;
};

LossGradients loss_gradients(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X,
                             const GcnParams& params, const SeedTargets& targets,
                             double l2_coefficient, const Eigen::MatrixXd* hidden_mask = nullptr);

/// Glorot-uniform parameters for the given feature count.
GcnParams glorot_init(std::size_t features, std::size_t hidden, std::size_t classes, std::uint64_t seed);

struct TrainResult {
  GcnParams params;
  std::vector<double> loss_history;  // training-mode loss per epoch
  double final_loss = 0.0;           // loss of the final params without dropout
  bool single_class_seeds = false;
};

/// Full-batch Adam on the masked cross-entropy with a fresh dropout mask per
/// epoch. Throws DivergenceError on a non-finite loss.
TrainResult train_gcn(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X,
                      const SeedTargets& targets, const TrainConfig& config);

/// Row-wise argmax; a tie maps to Rise.
std::vector<Movement> predict_labels(const Eigen::MatrixXd& Y);

std::string params_to_json(const GcnParams& params);
GcnParams params_from_json(std::string_view text);

}  // namespace netpred
