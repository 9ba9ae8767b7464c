#include "netpred/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "netpred/errors.hpp"
#include "netpred/parallel.hpp"

namespace netpred {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& doc, const char* key, T& out) {
  if (doc.contains(key) && !doc.at(key).is_null()) out = doc.at(key).get<T>();
}

std::string_view prune_name(PruneMode mode) {
  return mode == PruneMode::StopAtFirstBridge ? "stop_at_first_bridge" : "skip_bridges";
}

PruneMode parse_prune(std::string_view name) {
  if (name == "stop_at_first_bridge") return PruneMode::StopAtFirstBridge;
  if (name == "skip_bridges") return PruneMode::SkipBridges;
  throw InputError("unknown prune mode: " + std::string(name));
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void RunConfig::validate() const {
  forecast.validate();
  if (rebuild_days < 1 || weight_refresh_days < 1) throw InputError("rebuild cadences must be at least 1");
  for (auto k : k_clusters_sweep)
    if (k < 1) throw InputError("k_clusters sweep values must be at least 1");
  if (from && to && *to < *from) throw InputError("test range ends before it starts");
}

RunConfig run_config_from_json(const json& doc, RunConfig base) {
  RunConfig c = std::move(base);
  try {
    if (doc.contains("bars")) c.bars_path = doc.at("bars").get<std::string>();
    if (doc.contains("manifest")) c.manifest_path = doc.at("manifest").get<std::string>();
    auto& f = c.forecast;
    read(doc, "lambda", f.network.lambda);
    read(doc, "k_neighbors", f.k_neighbors);
    read(doc, "k_clusters", f.k_clusters);
    read(doc, "k_clusters_sweep", c.k_clusters_sweep);
    read(doc, "train_len", f.train_len);
    read(doc, "validation_len", f.validation_len);
    read(doc, "rebuild_days", c.rebuild_days);
    read(doc, "weight_refresh_days", c.weight_refresh_days);
    read(doc, "seed", f.seed);
    read(doc, "threads", f.threads);
    read(doc, "constituents_per_index", c.constituents_per_index);
    read(doc, "test_days", c.test_days);
    read(doc, "include_timings", c.include_timings);
    read(doc, "influence_top_k", f.network.influence_top_k);
    if (doc.contains("variant")) f.variant = parse_variant(doc.at("variant").get<std::string>());
    if (doc.contains("prune")) f.network.prune = parse_prune(doc.at("prune").get<std::string>());
    if (doc.contains("from") && !doc.at("from").is_null()) c.from = Date::parse(doc.at("from").get<std::string>());
    if (doc.contains("to") && !doc.at("to").is_null()) c.to = Date::parse(doc.at("to").get<std::string>());
    if (doc.contains("forest")) {
      const auto& b = doc.at("forest");
      read(b, "n_trees", f.forest.n_trees);
      read(b, "max_depth", f.forest.max_depth);
      read(b, "min_samples_split", f.forest.min_samples_split);
      read(b, "bootstrap_fraction", f.forest.bootstrap_fraction);
      read(b, "max_bins", f.forest.max_bins);
    }
    if (doc.contains("svm")) {
      const auto& b = doc.at("svm");
      read(b, "C", f.network.svm.C);
      read(b, "max_epochs", f.network.svm.max_epochs);
      read(b, "tolerance", f.network.svm.tolerance);
    }
    if (doc.contains("kmeans")) {
      const auto& b = doc.at("kmeans");
      read(b, "restarts", f.kmeans.restarts);
      read(b, "max_iterations", f.kmeans.max_iterations);
    }
    if (doc.contains("gcn")) {
      const auto& b = doc.at("gcn");
      read(b, "learning_rate", f.gcn.learning_rate);
      read(b, "epochs", f.gcn.epochs);
      read(b, "dropout_rate", f.gcn.dropout_rate);
      read(b, "l2_coefficient", f.gcn.l2_coefficient);
      read(b, "beta1", f.gcn.beta1);
      read(b, "beta2", f.gcn.beta2);
      read(b, "epsilon", f.gcn.epsilon);
      read(b, "hidden_channels", f.gcn.hidden_channels);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what(), 0);
  }
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& f = c.forecast;
  json doc{
      {"bars", c.bars_path.string()},
      {"manifest", c.manifest_path.string()},
      {"lambda", f.network.lambda},
      {"k_neighbors", f.k_neighbors},
      {"k_clusters", f.k_clusters},
      {"k_clusters_sweep", c.k_clusters_sweep},
      {"train_len", f.train_len},
      {"validation_len", f.validation_len},
      {"rebuild_days", c.rebuild_days},
      {"weight_refresh_days", c.weight_refresh_days},
      {"seed", f.seed},
      {"variant", variant_name(f.variant)},
      {"prune", prune_name(f.network.prune)},
      {"influence_top_k", f.network.influence_top_k},
      {"constituents_per_index", c.constituents_per_index},
      {"test_days", c.test_days},
      {"from", c.from ? json(c.from->iso()) : json(nullptr)},
      {"to", c.to ? json(c.to->iso()) : json(nullptr)},
      {"forest",
       {{"n_trees", f.forest.n_trees},
        {"max_depth", f.forest.max_depth},
        {"min_samples_split", f.forest.min_samples_split},
        {"bootstrap_fraction", f.forest.bootstrap_fraction},
        {"max_bins", f.forest.max_bins}}},
      {"svm", {{"C", f.network.svm.C}, {"max_epochs", f.network.svm.max_epochs}, {"tolerance", f.network.svm.tolerance}}},
      {"kmeans", {{"restarts", f.kmeans.restarts}, {"max_iterations", f.kmeans.max_iterations}}},
      {"gcn",
       {{"learning_rate", f.gcn.learning_rate},
        {"epochs", f.gcn.epochs},
        {"dropout_rate", f.gcn.dropout_rate},
        {"l2_coefficient", f.gcn.l2_coefficient},
        {"beta1", f.gcn.beta1},
        {"beta2", f.gcn.beta2},
        {"epsilon", f.gcn.epsilon},
        {"hidden_channels", f.gcn.hidden_channels}}},
  };
  return doc;
}

// ---------------------------------------------------------------------------
// Scoring

double macro_f1(std::span<const Movement> predictions, std::span<const Movement> truth) {
  if (predictions.size() != truth.size()) throw InputError("macro_f1: length mismatch");
  if (predictions.empty()) throw InputError("macro_f1: no labels");
  auto f_measure = [&](Movement cls) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = predictions[i] == cls, t = truth[i] == cls;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    if (tp + fp + fn == 0) return 1.0;
    // F = 2PR / (P + R) = 2tp / (2tp + fp + fn); zero when tp is zero.
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  };
  return 0.5 * (f_measure(Movement::Rise) + f_measure(Movement::Fall));
}

void Confusion::add(Movement predicted, Movement actual) {
  if (predicted == Movement::Rise) {
    (actual == Movement::Rise ? true_rise : false_rise) += 1;
  } else {
    (actual == Movement::Fall ? true_fall : false_fall) += 1;
  }
}

double EvaluationReport::mean_macro_f1() const {
  if (macro_f1.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [index, value] : macro_f1) sum += value;
  return sum / static_cast<double>(macro_f1.size());
}

// ---------------------------------------------------------------------------
// Walk-forward

std::vector<DayIndex> test_day_range(const PipelineState& state, const RunConfig& config) {
  const auto& cal = state.calendar();
  DayIndex begin = 0, end = cal.size();
  if (config.from || config.to) {
    if (config.from)
      begin = static_cast<DayIndex>(std::lower_bound(cal.days().begin(), cal.days().end(), *config.from) -
                                    cal.days().begin());
    if (config.to)
      end = static_cast<DayIndex>(std::upper_bound(cal.days().begin(), cal.days().end(), *config.to) -
                                  cal.days().begin());
  } else if (config.test_days > 0) {
    begin = cal.size() > config.test_days ? cal.size() - config.test_days : 0;
  } else {
    throw InputError("no test range: give from/to dates or a test day count");
  }
  if (begin >= end) throw InputError("the test range contains no trading days");
  std::vector<DayIndex> days;
  for (DayIndex d = begin; d < end; ++d) days.push_back(d);
  return days;
}

PipelineState load_pipeline(const RunConfig& config) {
  auto manifest = load_manifest(config.manifest_path);
  manifest.validate(config.constituents_per_index);
  return PipelineState::build(load_bars(config.bars_path), std::move(manifest));
}

namespace {

struct DayBatch {
  std::vector<DayRecord> records;
  std::vector<Date> builds;
  std::uint64_t violations = 0;
  double network_ms = 0.0;
};

/// Forecasts `days` in order, rebuilding the network every `cadence` days
/// counted from the first one.
DayBatch run_days(const PipelineState& state, const ForecastConfig& config, const std::vector<DayIndex>& days,
                  std::size_t cadence) {
  DayBatch batch;
  const std::size_t n = days.size();
  const std::size_t slots = (n + cadence - 1) / cadence;
  std::vector<std::optional<PredictionNetwork>> networks(slots);
  std::vector<std::string> network_errors(slots);
  for (std::size_t k = 0; k < slots; ++k) {
    const DayIndex anchor = days[k * cadence];
    AccessAudit audit;
    const auto start = std::chrono::steady_clock::now();
    try {
      networks[k] = build_network_for_day(state, anchor, config, &audit);
      batch.builds.push_back(state.calendar()[anchor]);
    } catch (const Error& e) {
      network_errors[k] = e.what();
    }
    batch.network_ms += elapsed_ms(start);
    batch.violations += audit.violations();
    if (audit.latest_feature_day() >= static_cast<std::int64_t>(anchor)) ++batch.violations;
  }

  const std::size_t outer = config.threads == 0 ? default_thread_count() : config.threads;
  ForecastConfig day_config = config;
  if (outer > 1) day_config.threads = 1;
  batch.records.resize(n);
  parallel_for(n, outer, [&](std::size_t i) {
    auto& r = batch.records[i];
    r.day = days[i];
    r.date = state.calendar()[days[i]];
    for (const auto& index : state.manifest().indices)
      r.realized[index.id] = state.realized_index_movement(index.id, days[i]);
    const auto& net = networks[i / cadence];
    if (!net) {
      r.failed_stage = "network";
      r.error = network_errors[i / cadence];
      return;
    }
    try {
      r.forecast = forecast_day(state, days[i], day_config, &*net);
      score_seed_accuracy(state, *r.forecast);
    } catch (const StageError& e) {
      r.failed_stage = e.stage();
      r.error = e.what();
    } catch (const Error& e) {
      r.failed_stage = "forecast";
      r.error = e.what();
    }
  });
  for (const auto& r : batch.records) {
    if (!r.forecast) continue;
    const auto& audit = r.forecast->diagnostics.audit;
    batch.violations += audit.violations;
    if (audit.latest_feature_day >= static_cast<std::int64_t>(r.day)) ++batch.violations;
  }
  return batch;
}

std::map<std::string, double> score_days(const PipelineState& state, const std::vector<DayRecord>& records,
                                         std::map<std::string, Confusion>* confusion) {
  std::map<std::string, double> scores;
  for (const auto& index : state.manifest().indices) {
    std::vector<Movement> predicted, actual;
    Confusion counts;
    for (const auto& r : records) {
      if (!r.forecast) continue;
      predicted.push_back(r.forecast->index_labels.at(index.id));
      actual.push_back(r.realized.at(index.id));
      counts.add(predicted.back(), actual.back());
    }
    scores[index.id] = predicted.empty() ? 0.0 : macro_f1(predicted, actual);
    if (confusion) (*confusion)[index.id] = counts;
  }
  return scores;
}

std::size_t choose_k_clusters(const PipelineState& state, const RunConfig& config, DayIndex first_test_day) {
  const std::size_t v = config.forecast.validation_len;
  const DayIndex earliest = state.first_forecast_day(config.forecast.train_len, v);
  if (first_test_day < earliest + v)
    throw WindowError("not enough history to choose k_clusters before the test range", earliest + v, first_test_day);
  std::vector<DayIndex> days;
  for (DayIndex d = first_test_day - v; d < first_test_day; ++d) days.push_back(d);
  std::vector<std::size_t> candidates = config.k_clusters_sweep;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::size_t best_k = candidates.front();
  double best = -1.0;
  for (auto k : candidates) {
    ForecastConfig fc = config.forecast;
    fc.k_clusters = k;
    const auto batch = run_days(state, fc, days, config.cadence());
    const auto scores = score_days(state, batch.records, nullptr);
    double mean = 0.0;
    for (const auto& [index, value] : scores) mean += value;
    mean /= static_cast<double>(std::max<std::size_t>(1, scores.size()));
    if (mean > best) {
      best = mean;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace

EvaluationReport walk_forward(const PipelineState& state, const RunConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto days = test_day_range(state, config);
  const DayIndex earliest = state.first_forecast_day(config.forecast.train_len, config.forecast.validation_len);
  if (days.front() < earliest)
    throw WindowError("the test range starts before a full training window is available", earliest, days.front());

  EvaluationReport report;
  report.config = config;
  ForecastConfig fc = config.forecast;
  if (!config.k_clusters_sweep.empty()) {
    const auto sweep_start = std::chrono::steady_clock::now();
    fc.k_clusters = choose_k_clusters(state, config, days.front());
    report.timings_ms["k_clusters_sweep"] = elapsed_ms(sweep_start);
  }
  report.k_clusters = fc.k_clusters;
  report.config.forecast.k_clusters = fc.k_clusters;

  auto batch = run_days(state, fc, days, config.cadence());
  report.network_builds = std::move(batch.builds);
  report.lookahead_violations = batch.violations;
  report.timings_ms["network"] = batch.network_ms;
  report.macro_f1 = score_days(state, batch.records, &report.confusion);
  for (const auto& r : batch.records) {
    if (!r.forecast) {
      ++report.failed_days;
      continue;
    }
    for (const auto& [stage, ms] : r.forecast->diagnostics.timings_ms) report.timings_ms[stage] += ms;
  }
  report.days = std::move(batch.records);
  report.timings_ms["total"] = elapsed_ms(start);
  return report;
}

EvaluationReport walk_forward(const RunConfig& config) {
  config.validate();
  return walk_forward(load_pipeline(config), config);
}

std::vector<SweepPoint> lambda_sweep(const PipelineState& state, const RunConfig& config,
                                     std::span<const double> lambdas) {
  if (lambdas.empty()) throw InputError("lambda sweep needs at least one value");
  for (double l : lambdas)
    if (!(l > 0.0 && l < 1.0)) throw InputError("lambda sweep values must lie in (0, 1)");
  std::vector<SweepPoint> out;
  for (double l : lambdas) {
    RunConfig c = config;
    c.forecast.network.lambda = l;
    out.push_back({l, walk_forward(state, c)});
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& sweep) {
  std::ostringstream out;
  out.precision(17);
  out << "lambda,mean_macro_f1";
  if (!sweep.empty())
    for (const auto& [index, value] : sweep.front().report.macro_f1) out << ',' << index;
  out << '\n';
  for (const auto& p : sweep) {
    out << p.lambda << ',' << p.report.mean_macro_f1();
    for (const auto& [index, value] : p.report.macro_f1) out << ',' << value;
    out << '\n';
  }
  return out.str();
}

EvaluationReport ablation_run(const PipelineState& state, const RunConfig& config, Variant variant) {
  RunConfig c = config;
  c.forecast.variant = variant;
  return walk_forward(state, c);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json labels_json(const std::map<std::string, Movement>& labels) {
  json out = json::object();
  for (const auto& [symbol, label] : labels) out[symbol] = sign_value(label);
  return out;
}

json forecast_body(const DailyForecast& f) {
  const auto& d = f.diagnostics;
  json seeds = json::array();
  for (const auto& [symbol, label] : f.seeds.labels) {
    const auto& p = f.seeds.provenance.at(symbol);
    seeds.push_back({{"symbol", symbol},
                     {"label", sign_value(label)},
                     {"group", p.cluster},
                     {"validation_accuracy", p.validation_accuracy}});
  }
  json clusters = nullptr;
  if (d.clusters) {
    clusters = json::object();
    for (std::size_t i = 0; i < d.clusters->nodes.size(); ++i) clusters[d.clusters->nodes[i]] = d.clusters->cluster[i];
  }
  return {
      {"index_labels", labels_json(f.index_labels)},
      {"index_weighted_sum", d.index_weighted_sum},
      {"stock_labels", labels_json(f.stock_labels)},
      {"seeds", seeds},
      {"skipped_clusters", f.seeds.skipped_clusters},
      {"seed_accuracy", d.seed_accuracy ? json(*d.seed_accuracy) : json(nullptr)},
      {"clusters", clusters},
      {"similarity", {{"gamma", d.similarity_gamma}, {"edges", d.similarity_edges}}},
      {"gcn",
       {{"initial_loss", d.gcn_initial_loss},
        {"final_loss", d.gcn_final_loss},
        {"single_class_seeds", d.single_class_seeds}}},
      {"network_built_on", d.network_built_on.iso()},
      {"audit",
       {{"feature_reads", d.audit.feature_reads},
        {"label_reads", d.audit.label_reads},
        {"latest_feature_day", d.audit.latest_feature_day},
        {"latest_label_day", d.audit.latest_label_day},
        {"violations", d.audit.violations}}},
  };
}

}  // namespace

std::string forecast_to_json(const DailyForecast& forecast, bool include_timings) {
  json doc = forecast_body(forecast);
  doc["date"] = forecast.date.iso();
  doc["day"] = forecast.day;
  if (include_timings) doc["timings_ms"] = forecast.diagnostics.timings_ms;
  return doc.dump(2);
}

std::string report_to_json(const EvaluationReport& report, bool include_timings) {
  json doc;
  doc["config"] = run_config_to_json(report.config);
  doc["k_clusters"] = report.k_clusters;
  doc["macro_f1"] = report.macro_f1;
  doc["mean_macro_f1"] = report.mean_macro_f1();
  auto& confusion = doc["confusion"] = json::object();
  for (const auto& [index, c] : report.confusion)
    confusion[index] = {{"true_rise", c.true_rise},
                        {"false_rise", c.false_rise},
                        {"false_fall", c.false_fall},
                        {"true_fall", c.true_fall}};
  doc["evaluated_days"] = report.days.size() - report.failed_days;
  doc["failed_days"] = report.failed_days;
  doc["lookahead_violations"] = report.lookahead_violations;
  doc["network_builds"] = json::array();
  for (const auto& d : report.network_builds) doc["network_builds"].push_back(d.iso());
  auto& days = doc["days"] = json::array();
  json day_timings = json::object();
  for (const auto& r : report.days) {
    json day = {{"date", r.date.iso()}, {"day", r.day}, {"realized", labels_json(r.realized)}};
    if (r.forecast) {
      day["status"] = "ok";
      day.update(forecast_body(*r.forecast));
      day_timings[r.date.iso()] = r.forecast->diagnostics.timings_ms;
    } else {
      day["status"] = "failed";
      day["stage"] = r.failed_stage;
      day["error"] = r.error;
    }
    days.push_back(std::move(day));
  }
  if (include_timings) doc["timings_ms"] = {{"stages", report.timings_ms}, {"days", day_timings}};
  return doc.dump(2);
}

}  // namespace netpred
