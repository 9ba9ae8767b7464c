#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netpred/gcn.hpp"
#include "netpred/market_data.hpp"
#include "netpred/random_forest.hpp"
#include "netpred/relations.hpp"
#include "netpred/seed_labeling.hpp"
#include "netpred/state_clustering.hpp"

namespace netpred {

enum class Variant {
  None,
  RandomSeedSelection,
  MostPredictableOnly,
  ClusterOnPredictionNetwork,
  IndicesAsNodes,
};

std::string_view variant_name(Variant v);
/// Throws InputError for an unknown name.
Variant parse_variant(std::string_view name);

struct ForecastConfig {
  std::size_t train_len = 240;
  std::size_t validation_len = 20;
  std::size_t k_neighbors = 8;
  std::size_t k_clusters = 20;
  NetworkConfig network;
  ForestConfig forest;
  KMeansConfig kmeans;
  TrainConfig gcn;
  Variant variant = Variant::None;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  void validate() const;
};

/// Bars, manifest and every derived series the forecaster reads. Built once
/// and shared read-only by all forecast days.
class PipelineState {
 public:
  static PipelineState build(BarSet bars, UniverseManifest manifest);

  const BarSet& bars() const { return bars_; }
  const Calendar& calendar() const { return bars_.calendar; }
  const UniverseManifest& manifest() const { return manifest_; }
  const std::vector<std::string>& stocks() const { return stocks_; }

  const FeatureFrame& classic(std::string_view symbol) const;
  const FeatureFrame& signal(std::string_view symbol) const;
  const LabelSeries& labels(std::string_view symbol) const;
  /// SIGNAL features of an index series when its bars are part of the data.
  const FeatureFrame* index_signal(std::string_view index) const;

  /// First anchor day with a full train and validation window after warm-up.
  DayIndex first_forecast_day(std::size_t train_len, std::size_t validation_len) const;

  /// Realized movement of an index on `day`: from its own bars when present,
  /// otherwise from the constituent index level against the previous day.
  Movement realized_index_movement(std::string_view index, DayIndex day) const;

 private:
  std::size_t position(std::string_view symbol) const;

  BarSet bars_;
  UniverseManifest manifest_;
  std::vector<std::string> stocks_;  // sorted
  std::vector<FeatureFrame> classic_, signal_;
  std::vector<LabelSeries> labels_;
  std::map<std::string, FeatureFrame, std::less<>> index_signal_;
  std::map<std::string, LabelSeries, std::less<>> index_labels_;
};

/// sign(sum of w_ik * L_k over the index's constituents); zero maps to Rise.
/// Throws InputError naming the first constituent without a label.
Movement aggregate_index_label(const PredictionNetwork& network,
                               const std::map<std::string, Movement>& stock_labels,
                               std::string_view index, double* weighted_sum = nullptr);

struct AuditSummary {
  std::uint64_t feature_reads = 0;
  std::uint64_t label_reads = 0;
  std::int64_t latest_feature_day = -1;
  std::int64_t latest_label_day = -1;
  std::uint64_t violations = 0;
};

struct ForecastDiagnostics {
  std::map<std::string, double> index_weighted_sum;
  std::vector<CandidateScore> candidates;
  std::optional<ClusterAssignment> clusters;
  double similarity_gamma = 0.0;
  std::size_t similarity_edges = 0;
  double gcn_initial_loss = 0.0;
  double gcn_final_loss = 0.0;
  bool single_class_seeds = false;
  Date network_built_on;
  /// Fraction of seed labels matching the realized movement; filled by
  /// score_seed_accuracy after the day is known.
  std::optional<double> seed_accuracy;
  AuditSummary audit;
  std::map<std::string, double> timings_ms;
};

struct DailyForecast {
  DayIndex day = 0;
  Date date;
  std::map<std::string, Movement> stock_labels;
  std::map<std::string, Movement> index_labels;
  SeedLabels seeds;
  ForecastDiagnostics diagnostics;
};

/// Prediction network for anchor day `anchor`, built only from data before it.
PredictionNetwork build_network_for_day(const PipelineState& state, DayIndex anchor,
                                        const ForecastConfig& config, AccessAudit* audit = nullptr);

/// Forecasts the index movements of day `anchor` from data strictly before it.
/// `network` is reused when given (it must predate the anchor); otherwise it is
/// built for this day. Stage failures are rethrown as StageError.
DailyForecast forecast_day(const PipelineState& state, DayIndex anchor, const ForecastConfig& config,
                           const PredictionNetwork* network = nullptr);

/// Fills diagnostics.seed_accuracy from the realized labels of the forecast day.
void score_seed_accuracy(const PipelineState& state, DailyForecast& forecast);

}  // namespace netpred
