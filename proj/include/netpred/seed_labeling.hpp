#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpred/market_data.hpp"
#include "netpred/random_forest.hpp"
#include "netpred/relations.hpp"
#include "netpred/state_clustering.hpp"

namespace netpred {

struct SeedProvenance {
  std::size_t cluster = 0;
  double validation_accuracy = 0.0;
  bool operator==(const SeedProvenance&) const = default;
};

struct SeedLabels {
  std::map<std::string, Movement> labels;
  std::map<std::string, SeedProvenance> provenance;
  /// Clusters whose members all had degenerate training windows.
  std::vector<std::size_t> skipped_clusters;

  std::size_t size() const { return labels.size(); }
  bool operator==(const SeedLabels&) const = default;
};

/// Fraction of rows the forest classifies correctly. Throws InputError when empty.
double predictability_score(const RandomForest& model, const Dataset& validation);

/// Forest trained for one stock: its validation accuracy and its prediction
/// for the anchor day. Both are empty when the training window is single-class.
struct CandidateScore {
  std::string symbol;
  std::optional<double> accuracy;
  std::optional<Movement> prediction;
};

struct SeedConfig {
  ForestConfig forest;
  std::size_t train_len = 240;
  std::size_t validation_len = 20;
  std::size_t threads = 0;
};

/// Trains one forest per stock on the train window before `anchor`, scores it on
/// the validation window and predicts the anchor day from features of anchor - 1.
/// The per-stock forest seed derives from the config seed and the ticker.
/// `stocks` views must not expose days at or after `anchor`.
std::vector<CandidateScore> score_candidates(std::span<const StockInputs> stocks, DayIndex anchor,
                                             const Calendar& calendar, const SeedConfig& config);

/// One seed per cluster: the member with the highest validation accuracy
/// (ties by ticker), labelled with its own forest's prediction.
SeedLabels select_cluster_seeds(std::span<const CandidateScore> scores,
                                const ClusterAssignment& clusters);

/// The k highest-scoring stocks, no clustering (ties by ticker).
SeedLabels select_top_seeds(std::span<const CandidateScore> scores, std::size_t k);

/// k stocks drawn uniformly among those with a usable model.
SeedLabels select_random_seeds(std::span<const CandidateScore> scores, std::size_t k,
                               std::uint64_t seed);

/// score_candidates + select_cluster_seeds over the clustered stocks. Every
/// clustered stock must be a stock node of `network`.
SeedLabels inject_seed_labels(const PredictionNetwork& network, const ClusterAssignment& clusters,
                              std::span<const StockInputs> stocks, DayIndex anchor,
                              const Calendar& calendar, const SeedConfig& config);

}  // namespace netpred
