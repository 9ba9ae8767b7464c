#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netpred/linear_svm.hpp"
#include "netpred/market_data.hpp"

namespace netpred {

struct CorrelationResult {
  double value = 0.0;
  /// Set when either series has zero variance; value is then 0.
  bool degenerate = false;
};

/// Pearson correlation of two equal-length series (length >= 2).
CorrelationResult pearson_correlation(std::span<const double> a, std::span<const double> b);
CorrelationResult pearson_correlation(std::span<const int> a, std::span<const int> b);

/// Validation accuracy of a margin classifier trained on the train split;
/// nullopt when the training labels are degenerate.
std::optional<double> margin_accuracy(const Dataset& train, const Dataset& validation,
                                      const SvmConfig& config);

struct InfluenceRecord {
  std::string stock_i, stock_j;
  double acc_raw_i = 0.0, acc_raw_j = 0.0;
  double acc_proc_i = 0.0, acc_proc_j = 0.0;
  /// A degenerate stock contributes 0 to the influence average.
  bool degenerate_i = false, degenerate_j = false;
  double influence = 0.0;
};

/// Half the summed accuracy gains of the two stocks.
double influence_from_accuracies(double acc_raw_i, double acc_raw_j, double acc_proc_i,
                                 double acc_proc_j);

/// Trains the four classifiers for a pair: each stock on its own features and
/// each stock on the day-wise mean of both stocks' features.
InfluenceRecord influence(const FeatureView& features_i, const FeatureView& features_j,
                          const LabelView& labels_i, const LabelView& labels_j,
                          const WindowSplit& split, const SvmConfig& config);

struct StockIndexEdge {
  std::string index;
  std::string stock;
  double weight = 0.0;
  bool operator==(const StockIndexEdge&) const = default;
};

/// Cap-weighted: log10(cap) / sum of log10(cap); price-weighted: price / sum of
/// prices. Throws InputError naming the stock for non-positive caps or prices
/// (caps must exceed 1 so the logarithm is positive).
std::vector<StockIndexEdge> index_edge_weights(const UniverseManifest& manifest,
                                               const std::map<std::string, double>& latest_prices);

/// lambda * influence + (1 - lambda) * correlation; lambda in (0, 1).
double combine_edge_weight(double correlation, double influence, double lambda);

struct StockStockEdge {
  std::string a, b;  // a < b
  double weight = 0.0;
  double correlation = 0.0;
  double influence = 0.0;
  bool operator==(const StockStockEdge&) const = default;
};

struct PredictionNetwork {
  std::vector<std::string> index_nodes;
  std::vector<std::string> stock_nodes;  // sorted
  std::vector<StockIndexEdge> stock_index_edges;  // sorted by (index, stock)
  std::vector<StockStockEdge> stock_stock_edges;  // sorted by (a, b)
  double lambda = 0.7;
  Date built_on;

  std::optional<std::size_t> stock_position(std::string_view ticker) const;
  /// Stock-index edges of one index.
  std::vector<StockIndexEdge> constituents(std::string_view index) const;
  /// Throws InputError on any broken invariant other than connectivity.
  void validate() const;
  bool operator==(const PredictionNetwork&) const = default;
};

bool stock_subgraph_connected(const PredictionNetwork& network);

enum class PruneMode {
  /// Remove edges in ascending weight order until the next one is a bridge.
  StopAtFirstBridge,
  /// Skip bridges and keep removing later removable edges.
  SkipBridges,
};

/// Ascending weight order, ties broken by (a, b). Stock-index edges are kept.
/// Throws InputError when the stock subgraph is disconnected.
PredictionNetwork prune_edges(const PredictionNetwork& network,
                              PruneMode mode = PruneMode::StopAtFirstBridge);

struct NetworkConfig {
  double lambda = 0.7;
  PruneMode prune = PruneMode::StopAtFirstBridge;
  SvmConfig svm;
  /// 0 computes influence for all pairs; otherwise only for the K pairs with
  /// largest |correlation| (others get influence 0).
  std::size_t influence_top_k = 0;
  std::size_t threads = 0;
};

/// Builds the full prediction network and prunes it. `stocks` must cover every
/// constituent of the manifest; correlations use training-window labels and
/// influence accuracies use the validation window.
PredictionNetwork build_prediction_network(const UniverseManifest& manifest,
                                           std::span<const StockInputs> stocks,
                                           const WindowSplit& split,
                                           const std::map<std::string, double>& latest_prices,
                                           Date built_on, const NetworkConfig& config);

std::string network_to_json(const PredictionNetwork& network);
PredictionNetwork network_from_json(std::string_view text);

/// Index level from constituent closes. Price-weighted: mean close.
/// Cap-weighted: sum over s of cap_s * close_s(day) / close_s(reference_day),
/// divided by the total cap.
double index_level(const IndexSpec& index, const std::map<std::string, double>& market_caps,
                   const BarSet& bars, DayIndex day, DayIndex reference_day);

}  // namespace netpred
