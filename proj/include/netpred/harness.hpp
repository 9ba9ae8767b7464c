#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpred/forecasting.hpp"
#include "netpred/market_data.hpp"

namespace netpred {

struct RunConfig {
  std::filesystem::path bars_path;
  std::filesystem::path manifest_path;
  ForecastConfig forecast;
  /// The network is rebuilt every min(rebuild_days, weight_refresh_days) test days.
  std::size_t rebuild_days = 30;
  std::size_t weight_refresh_days = 60;
  /// When non-empty, k_clusters is chosen from this set on the validation days
  /// before the first test day (ties go to the smaller k).
  std::vector<std::size_t> k_clusters_sweep;
  /// Test range; without dates the last `test_days` trading days are used.
  std::optional<Date> from;
  std::optional<Date> to;
  std::size_t test_days = 0;
  /// 0 accepts any constituent count.
  std::size_t constituents_per_index = 100;
  bool include_timings = true;

  void validate() const;
  std::size_t cadence() const { return std::min(rebuild_days, weight_refresh_days); }
};

/// Keys absent from `doc` keep the value they have in `base`.
RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig base = {});
nlohmann::json run_config_to_json(const RunConfig& config);

/// Mean of the rise and fall F-measures. A class absent from both sequences
/// scores 1; a class with a zero precision + recall denominator scores 0.
double macro_f1(std::span<const Movement> predictions, std::span<const Movement> truth);

struct Confusion {
  std::size_t true_rise = 0, false_rise = 0, false_fall = 0, true_fall = 0;
  std::size_t total() const { return true_rise + false_rise + false_fall + true_fall; }
  void add(Movement predicted, Movement actual);
};

struct DayRecord {
  DayIndex day = 0;
  Date date;
  std::optional<DailyForecast> forecast;
  std::map<std::string, Movement> realized;
  std::string failed_stage;
  std::string error;
};

struct EvaluationReport {
  RunConfig config;
  std::size_t k_clusters = 0;
  std::map<std::string, double> macro_f1;
  std::map<std::string, Confusion> confusion;
  std::vector<DayRecord> days;
  std::size_t failed_days = 0;
  std::vector<Date> network_builds;
  /// Feature reads dated at or after a day's anchor, over all days and builds.
  std::uint64_t lookahead_violations = 0;
  std::map<std::string, double> timings_ms;

  double mean_macro_f1() const;
};

/// Deterministic JSON; timings go to a separate object that is omitted when
/// `include_timings` is false.
std::string report_to_json(const EvaluationReport& report, bool include_timings);

/// Trading days under test. Throws InputError when the range is empty.
std::vector<DayIndex> test_day_range(const PipelineState& state, const RunConfig& config);

PipelineState load_pipeline(const RunConfig& config);

EvaluationReport walk_forward(const PipelineState& state, const RunConfig& config);
EvaluationReport walk_forward(const RunConfig& config);

struct SweepPoint {
  double lambda = 0.0;
  EvaluationReport report;
};

/// One walk-forward per lambda value on shared data; values must lie in (0, 1).
std::vector<SweepPoint> lambda_sweep(const PipelineState& state, const RunConfig& config,
                                     std::span<const double> lambdas);
/// `lambda,mean_macro_f1,<index>...` with one row per value.
std::string sweep_csv(const std::vector<SweepPoint>& sweep);

EvaluationReport ablation_run(const PipelineState& state, const RunConfig& config, Variant variant);

std::string forecast_to_json(const DailyForecast& forecast, bool include_timings);

}  // namespace netpred
