#include "netpred/forecasting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "netpred/errors.hpp"
#include "netpred/rng.hpp"

namespace netpred {

namespace {

constexpr std::pair<Variant, std::string_view> kVariantNames[] = {
    {Variant::None, "none"},
    {Variant::RandomSeedSelection, "random_seed_selection"},
    {Variant::MostPredictableOnly, "most_predictable_only"},
    {Variant::ClusterOnPredictionNetwork, "cluster_on_prediction_network"},
    {Variant::IndicesAsNodes, "indices_as_nodes"},
};

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
      sink_[stage] += elapsed.count();
    };
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record();
      } else {
        auto out = fn();
        record();
        return out;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  std::map<std::string, double>& sink_;
};

std::map<std::string, double> closes_before(const PipelineState& state, DayIndex anchor) {
  std::map<std::string, double> prices;
  for (const auto& s : state.stocks()) prices[s] = state.bars().at(s).close.at(anchor - 1);
  return prices;
}

std::vector<StockInputs> stock_inputs(const PipelineState& state, DayIndex anchor, AccessAudit* audit) {
  std::vector<StockInputs> out;
  out.reserve(state.stocks().size());
  for (const auto& s : state.stocks())
    out.push_back({s, FeatureView(state.classic(s), anchor, audit), LabelView(state.labels(s), anchor, audit)});
  return out;
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& [variant, name] : kVariantNames)
    if (variant == v) return name;
  throw InputError("unknown variant");
}

Variant parse_variant(std::string_view name) {
  for (const auto& [variant, n] : kVariantNames)
    if (n == name) return variant;
  throw InputError("unknown variant: " + std::string(name));
}

void ForecastConfig::validate() const {
  if (train_len < 2) throw InputError("train_len must be at least 2");
  if (validation_len < 1) throw InputError("validation_len must be at least 1");
  if (k_neighbors < 1) throw InputError("k_neighbors must be at least 1");
  if (k_clusters < 1) throw InputError("k_clusters must be at least 1");
  if (!(network.lambda > 0.0 && network.lambda < 1.0)) throw InputError("lambda must lie in (0, 1)");
  gcn.validate();
}

// ---------------------------------------------------------------------------
// PipelineState

PipelineState PipelineState::build(BarSet bars, UniverseManifest manifest) {
  manifest.validate();
  PipelineState state;
  state.stocks_ = manifest.stocks();
  for (const auto& s : state.stocks_) {
    const auto& series = bars.at(s);
    state.classic_.push_back(compute_features(series, FeatureProfile::Classic));
    state.signal_.push_back(compute_features(series, FeatureProfile::Signal));
    state.labels_.push_back(LabelSeries::from_bars(series));
  }
  for (const auto& index : manifest.indices) {
    if (const auto* series = bars.find(index.id)) {
      state.index_signal_.emplace(index.id, compute_features(*series, FeatureProfile::Signal));
      state.index_labels_.emplace(index.id, LabelSeries::from_bars(*series));
    }
  }
  state.bars_ = std::move(bars);
  state.manifest_ = std::move(manifest);
  return state;
}

std::size_t PipelineState::position(std::string_view symbol) const {
  const auto it = std::lower_bound(stocks_.begin(), stocks_.end(), symbol);
  if (it == stocks_.end() || *it != symbol) throw InputError("unknown stock " + std::string(symbol));
  return static_cast<std::size_t>(it - stocks_.begin());
}

const FeatureFrame& PipelineState::classic(std::string_view symbol) const { return classic_[position(symbol)]; }
const FeatureFrame& PipelineState::signal(std::string_view symbol) const { return signal_[position(symbol)]; }
const LabelSeries& PipelineState::labels(std::string_view symbol) const { return labels_[position(symbol)]; }

const FeatureFrame* PipelineState::index_signal(std::string_view index) const {
  const auto it = index_signal_.find(index);
  return it == index_signal_.end() ? nullptr : &it->second;
}

DayIndex PipelineState::first_forecast_day(std::size_t train_len, std::size_t validation_len) const {
  return kFeatureWarmup + 1 + train_len + validation_len;
}

Movement PipelineState::realized_index_movement(std::string_view index, DayIndex day) const {
  if (day == 0 || day >= calendar().size()) throw InputError("no realized movement for day " + std::to_string(day));
  if (const auto it = index_labels_.find(index); it != index_labels_.end()) return it->second.values[day];
  const auto& spec = manifest_.index(index);
  const double now = index_level(spec, manifest_.market_caps, bars_, day, day - 1);
  const double before = index_level(spec, manifest_.market_caps, bars_, day - 1, day - 1);
  return movement_of(now - before);
}

// ---------------------------------------------------------------------------

Movement aggregate_index_label(const PredictionNetwork& network,
                               const std::map<std::string, Movement>& stock_labels,
                               std::string_view index, double* weighted_sum) {
  if (std::find(network.index_nodes.begin(), network.index_nodes.end(), index) == network.index_nodes.end())
    throw InputError("unknown index " + std::string(index));
  double sum = 0.0;
  for (const auto& e : network.stock_index_edges) {
    if (e.index != index) continue;
    const auto it = stock_labels.find(e.stock);
    if (it == stock_labels.end()) throw InputError("no predicted label for constituent " + e.stock);
    sum += e.weight * sign_value(it->second);
  }
  if (weighted_sum) *weighted_sum = sum;
  return movement_of(sum);
}

PredictionNetwork build_network_for_day(const PipelineState& state, DayIndex anchor,
                                        const ForecastConfig& config, AccessAudit* audit) {
  const auto split = rolling_windows(state.calendar(), anchor, config.train_len, config.validation_len);
  if (split.train.begin < kFeatureWarmup + 1)
    throw WindowError("training window starts inside the feature warm-up",
                      state.first_forecast_day(config.train_len, config.validation_len), anchor);
  const auto inputs = stock_inputs(state, anchor, audit);
  NetworkConfig network = config.network;
  if (network.threads == 0) network.threads = config.threads;
  return build_prediction_network(state.manifest(), inputs, split, closes_before(state, anchor),
                                  state.calendar()[anchor], network);
}

DailyForecast forecast_day(const PipelineState& state, DayIndex anchor, const ForecastConfig& config,
                           const PredictionNetwork* network) {
  config.validate();
  if (anchor >= state.calendar().size())
    throw InputError("forecast day " + std::to_string(anchor) + " is outside the calendar");
  const DayIndex first = state.first_forecast_day(config.train_len, config.validation_len);
  if (anchor < first) throw WindowError("forecast day precedes the first usable window", first, anchor);
  if (network && network->built_on > state.calendar()[anchor])
    throw InputError("network was built after the forecast day");

  DailyForecast out;
  out.day = anchor;
  out.date = state.calendar()[anchor];
  auto& diag = out.diagnostics;
  StageTimer timer(diag.timings_ms);
  AccessAudit audit;
  const std::uint64_t day_seed = Rng::derive(config.seed, anchor);

  std::optional<PredictionNetwork> built;
  if (!network) {
    built = timer.run("network", [&] { return build_network_for_day(state, anchor, config, &audit); });
    network = &*built;
  }
  diag.network_built_on = network->built_on;
  const auto& nodes = network->stock_nodes;
  const std::size_t n = nodes.size();

  // SIGNAL features of the last completed day, one row per stock node.
  Eigen::MatrixXd X = timer.run("features", [&] {
    const std::size_t f = feature_names(FeatureProfile::Signal).size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = FeatureView(state.signal(nodes[i]), anchor, &audit).row(anchor - 1);
      for (std::size_t j = 0; j < f; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    return m;
  });

  const auto inputs = stock_inputs(state, anchor, &audit);
  SeedConfig seed_config{config.forest, config.train_len, config.validation_len, config.threads};
  seed_config.forest.seed = Rng::derive(day_seed, 1);
  diag.candidates = timer.run("predictability",
                              [&] { return score_candidates(inputs, anchor, state.calendar(), seed_config); });

  const std::size_t k = std::min(config.k_clusters, n);
  KMeansConfig kmeans = config.kmeans;
  kmeans.seed = Rng::derive(day_seed, 2);
  switch (config.variant) {
    case Variant::None:
    case Variant::IndicesAsNodes:
      diag.clusters = timer.run("clustering", [&] {
        const auto sim = build_similarity_network(nodes, X, std::min(config.k_neighbors, n - 1));
        diag.similarity_gamma = sim.gamma;
        diag.similarity_edges = sim.edges.size();
        return spectral_clustering(sim, k, kmeans);
      });
      break;
    case Variant::ClusterOnPredictionNetwork:
      diag.clusters = timer.run("clustering", [&] {
        return spectral_clustering(nodes, stock_weight_matrix(*network).cwiseMax(0.0), k, kmeans);
      });
      break;
    default:
      break;
  }

  out.seeds = timer.run("seeding", [&] {
    switch (config.variant) {
      case Variant::RandomSeedSelection:
        return select_random_seeds(diag.candidates, k, Rng::derive(day_seed, 4));
      case Variant::MostPredictableOnly:
        return select_top_seeds(diag.candidates, k);
      default:
        return select_cluster_seeds(diag.candidates, *diag.clusters);
    }
  });
  if (out.seeds.size() == 0) throw StageError("seeding", "no stock has a usable predictability model");

  // Graph and node features for the GCN; index nodes are appended only for
  // the indices-as-nodes variant.
  std::vector<std::string> graph_nodes = nodes;
  Eigen::MatrixXd weights = stock_weight_matrix(*network);
  Eigen::MatrixXd graph_X = X;
  if (config.variant == Variant::IndicesAsNodes) {
    const auto m = static_cast<Eigen::Index>(network->index_nodes.size());
    const auto ns = static_cast<Eigen::Index>(n);
    weights.conservativeResize(ns + m, ns + m);
    weights.rightCols(m).setZero();
    weights.bottomRows(m).setZero();
    graph_X.conservativeResize(ns + m, Eigen::NoChange);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto& index = network->index_nodes[static_cast<std::size_t>(r)];
      graph_nodes.push_back(index);
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(X.cols());
      for (const auto& e : network->constituents(index)) {
        const auto s = static_cast<Eigen::Index>(*network->stock_position(e.stock));
        weights(s, ns + r) = weights(ns + r, s) = e.weight;
        mean += e.weight * X.row(s);
      }
      if (const auto* frame = state.index_signal(index)) {
        const auto row = FeatureView(*frame, anchor, &audit).row(anchor - 1);
        for (Eigen::Index j = 0; j < X.cols(); ++j) graph_X(ns + r, j) = row[static_cast<std::size_t>(j)];
      } else {
        graph_X.row(ns + r) = mean;
      }
    }
  }

  const auto predicted = timer.run("gcn", [&] {
    const auto adjacency = normalized_adjacency(weights);
    const auto targets = seed_targets(graph_nodes, out.seeds.labels);
    TrainConfig train = config.gcn;
    train.seed = Rng::derive(day_seed, 3);
    const auto result = train_gcn(adjacency, graph_X, targets, train);
    diag.gcn_initial_loss = result.loss_history.front();
    diag.gcn_final_loss = result.final_loss;
    diag.single_class_seeds = result.single_class_seeds;
    return predict_labels(gcn_forward(adjacency, graph_X, result.params));
  });

  timer.run("aggregation", [&] {
    for (std::size_t i = 0; i < n; ++i) out.stock_labels[nodes[i]] = predicted[i];
    for (std::size_t r = 0; r < network->index_nodes.size(); ++r) {
      const auto& index = network->index_nodes[r];
      double sum = 0.0;
      const auto label = aggregate_index_label(*network, out.stock_labels, index, &sum);
      diag.index_weighted_sum[index] = sum;
      out.index_labels[index] = config.variant == Variant::IndicesAsNodes ? predicted[n + r] : label;
    }
  });

  diag.audit = {audit.feature_reads(), audit.label_reads(), audit.latest_feature_day(),
                audit.latest_label_day(), audit.violations()};
  return out;
}

void score_seed_accuracy(const PipelineState& state, DailyForecast& forecast) {
  if (forecast.seeds.size() == 0) return;
  std::size_t hits = 0;
  for (const auto& [symbol, label] : forecast.seeds.labels)
    hits += state.labels(symbol).values.at(forecast.day) == label;
  forecast.diagnostics.seed_accuracy = static_cast<double>(hits) / static_cast<double>(forecast.seeds.size());
}

}  // namespace netpred
