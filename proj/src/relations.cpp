#include "netpred/relations.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "netpred/errors.hpp"
#include "netpred/parallel.hpp"

namespace netpred {

CorrelationResult pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("correlation: series lengths differ");
  if (a.size() < 2) throw InputError("correlation: need at least two observations");
  const double n = static_cast<double>(a.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - mean_a;
    const double db = b[k] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a <= 0.0 || var_b <= 0.0) return {0.0, true};
  return {std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0), false};
}

CorrelationResult pearson_correlation(std::span<const int> a, std::span<const int> b) {
  const std::vector<double> da(a.begin(), a.end());
  const std::vector<double> db(b.begin(), b.end());
  return pearson_correlation(std::span<const double>(da), std::span<const double>(db));
}

std::optional<double> margin_accuracy(const Dataset& train, const Dataset& validation,
                                      const SvmConfig& config) {
  try {
    const auto model = LinearSvm::train(train.X, train.y, config);
    return model.accuracy(validation.X, validation.y);
  } catch (const DegenerateModelError&) {
    return std::nullopt;
  }
}

double influence_from_accuracies(double acc_raw_i, double acc_raw_j, double acc_proc_i,
                                 double acc_proc_j) {
  return 0.5 * ((acc_proc_i - acc_raw_i) + (acc_proc_j - acc_raw_j));
}

namespace {

struct StockDatasets {
  Dataset train;
  Dataset validation;
  std::optional<double> raw_accuracy;
};

StockDatasets stock_datasets(const FeatureView& features, const LabelView& labels,
                             const WindowSplit& split, const SvmConfig& config) {
  StockDatasets out{next_day_dataset(features, labels, split.train),
                    next_day_dataset(features, labels, split.validation), std::nullopt};
  out.raw_accuracy = margin_accuracy(out.train, out.validation, config);
  return out;
}

InfluenceRecord pair_influence(const std::string& name_i, const std::string& name_j,
                               const StockDatasets& si, const StockDatasets& sj,
                               const SvmConfig& config) {
  InfluenceRecord r;
  r.stock_i = name_i;
  r.stock_j = name_j;
  Dataset train_i{(si.train.X + sj.train.X) * 0.5, si.train.y};
  Dataset val_i{(si.validation.X + sj.validation.X) * 0.5, si.validation.y};
  Dataset train_j{train_i.X, sj.train.y};
  Dataset val_j{val_i.X, sj.validation.y};

  double gain_i = 0.0, gain_j = 0.0;
  const auto proc_i = si.raw_accuracy ? margin_accuracy(train_i, val_i, config) : std::nullopt;
  const auto proc_j = sj.raw_accuracy ? margin_accuracy(train_j, val_j, config) : std::nullopt;
  r.degenerate_i = !(si.raw_accuracy && proc_i);
  r.degenerate_j = !(sj.raw_accuracy && proc_j);
  if (!r.degenerate_i) {
    r.acc_raw_i = *si.raw_accuracy;
    r.acc_proc_i = *proc_i;
    gain_i = r.acc_proc_i - r.acc_raw_i;
  }
  if (!r.degenerate_j) {
    r.acc_raw_j = *sj.raw_accuracy;
    r.acc_proc_j = *proc_j;
    gain_j = r.acc_proc_j - r.acc_raw_j;
  }
  r.influence = 0.5 * (gain_i + gain_j);
  return r;
}

}  // namespace

InfluenceRecord influence(const FeatureView& features_i, const FeatureView& features_j,
                          const LabelView& labels_i, const LabelView& labels_j,
                          const WindowSplit& split, const SvmConfig& config) {
  const auto si = stock_datasets(features_i, labels_i, split, config);
  const auto sj = stock_datasets(features_j, labels_j, split, config);
  return pair_influence(labels_i.symbol(), labels_j.symbol(), si, sj, config);
}

std::vector<StockIndexEdge> index_edge_weights(const UniverseManifest& manifest,
                                               const std::map<std::string, double>& latest_prices) {
  std::vector<StockIndexEdge> edges;
  for (const auto& index : manifest.indices) {
    std::vector<double> raw;
    raw.reserve(index.constituents.size());
    for (const auto& s : index.constituents) {
      if (index.weighting == Weighting::CapWeighted) {
        const auto it = manifest.market_caps.find(s);
        if (it == manifest.market_caps.end() || !(it->second > 1.0))
          throw InputError(index.id + ": market cap of " + s + " must exceed 1");
        raw.push_back(std::log10(it->second));
      } else {
        const auto it = latest_prices.find(s);
        if (it == latest_prices.end() || !(it->second > 0.0))
          throw InputError(index.id + ": price of " + s + " must be positive");
        raw.push_back(it->second);
      }
    }
    const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    for (std::size_t k = 0; k < raw.size(); ++k)
      edges.push_back({index.id, index.constituents[k], raw[k] / total});
  }
  return edges;
}

double combine_edge_weight(double correlation, double influence, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw InputError("lambda must lie in (0, 1)");
  return lambda * influence + (1.0 - lambda) * correlation;
}

// ---------------------------------------------------------------------------
// Network

std::optional<std::size_t> PredictionNetwork::stock_position(std::string_view ticker) const {
  const auto it = std::lower_bound(stock_nodes.begin(), stock_nodes.end(), ticker);
  if (it == stock_nodes.end() || *it != ticker) return std::nullopt;
  return static_cast<std::size_t>(it - stock_nodes.begin());
}

std::vector<StockIndexEdge> PredictionNetwork::constituents(std::string_view index) const {
  std::vector<StockIndexEdge> out;
  for (const auto& e : stock_index_edges)
    if (e.index == index) out.push_back(e);
  return out;
}

void PredictionNetwork::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw InputError("network: lambda outside (0, 1)");
  if (!std::is_sorted(stock_nodes.begin(), stock_nodes.end()) ||
      std::adjacent_find(stock_nodes.begin(), stock_nodes.end()) != stock_nodes.end())
    throw InputError("network: stock nodes must be sorted and unique");
  const std::set<std::string> indices(index_nodes.begin(), index_nodes.end());
  if (indices.size() != index_nodes.size()) throw InputError("network: duplicate index node");
  std::map<std::string, double> sums;
  for (const auto& e : stock_index_edges) {
    if (!indices.contains(e.index)) throw InputError("network: unknown index " + e.index);
    if (!stock_position(e.stock)) throw InputError("network: unknown stock " + e.stock);
    if (!(e.weight > 0.0 && e.weight <= 1.0))
      throw InputError("network: stock-index weight outside (0, 1] for " + e.stock);
    sums[e.index] += e.weight;
  }
  for (const auto& id : index_nodes)
    if (std::abs(sums[id] - 1.0) > 1e-9)
      throw InputError("network: weights of index " + id + " do not sum to 1");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : stock_stock_edges) {
    if (e.a == e.b) throw InputError("network: self edge on " + e.a);
    if (!(e.a < e.b)) throw InputError("network: stock edge endpoints out of order");
    if (!stock_position(e.a) || !stock_position(e.b))
      throw InputError("network: stock edge with unknown endpoint");
    if (!std::isfinite(e.weight)) throw InputError("network: non-finite stock edge weight");
    if (!seen.emplace(e.a, e.b).second) throw InputError("network: duplicate stock edge");
  }
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

bool stock_subgraph_connected(const PredictionNetwork& network) {
  const std::size_t n = network.stock_nodes.size();
  if (n <= 1) return true;
  DisjointSets sets(n);
  std::size_t components = n;
  for (const auto& e : network.stock_stock_edges)
    if (sets.unite(*network.stock_position(e.a), *network.stock_position(e.b))) --components;
  return components == 1;
}

PredictionNetwork prune_edges(const PredictionNetwork& network, PruneMode mode) {
  if (!stock_subgraph_connected(network))
    throw InputError("prune: stock subgraph is disconnected");
  std::vector<StockStockEdge> edges = network.stock_stock_edges;
  std::stable_sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  // An edge is a bridge of the graph formed by itself and all later edges iff
  // its endpoints are disconnected by the later edges alone.
  std::vector<bool> bridge(edges.size());
  DisjointSets sets(network.stock_nodes.size());
  for (std::size_t k = edges.size(); k-- > 0;) {
    const auto a = *network.stock_position(edges[k].a);
    const auto b = *network.stock_position(edges[k].b);
    bridge[k] = sets.find(a) != sets.find(b);
    sets.unite(a, b);
  }
  std::vector<StockStockEdge> kept;
  if (mode == PruneMode::StopAtFirstBridge) {
    const auto first = std::find(bridge.begin(), bridge.end(), true);
    kept.assign(edges.begin() + (first - bridge.begin()), edges.end());
  } else {
    for (std::size_t k = 0; k < edges.size(); ++k)
      if (bridge[k]) kept.push_back(edges[k]);
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto& x, const auto& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  PredictionNetwork out = network;
  out.stock_stock_edges = std::move(kept);
  return out;
}

PredictionNetwork build_prediction_network(const UniverseManifest& manifest,
                                           std::span<const StockInputs> stocks,
                                           const WindowSplit& split,
                                           const std::map<std::string, double>& latest_prices,
                                           Date built_on, const NetworkConfig& config) {
  if (!(config.lambda > 0.0 && config.lambda < 1.0)) throw InputError("lambda must lie in (0, 1)");
  PredictionNetwork net;
  net.lambda = config.lambda;
  net.built_on = built_on;
  for (const auto& index : manifest.indices) net.index_nodes.push_back(index.id);
  net.stock_nodes = manifest.stocks();

  net.stock_index_edges = index_edge_weights(manifest, latest_prices);
  std::sort(net.stock_index_edges.begin(), net.stock_index_edges.end(),
            [](const auto& x, const auto& y) { return std::tie(x.index, x.stock) < std::tie(y.index, y.stock); });

  const std::size_t n = net.stock_nodes.size();
  std::vector<const StockInputs*> inputs(n, nullptr);
  for (const auto& s : stocks)
    if (auto pos = net.stock_position(s.symbol)) inputs[*pos] = &s;
  for (std::size_t i = 0; i < n; ++i)
    if (!inputs[i]) throw InputError("network: no features for constituent " + net.stock_nodes[i]);

  std::vector<StockDatasets> data(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    data[i] = stock_datasets(inputs[i]->classic, inputs[i]->labels, split, config.svm);
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  std::vector<CorrelationResult> correlation(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    correlation[p] = pearson_correlation(std::span<const int>(data[pairs[p].first].train.y),
                                         std::span<const int>(data[pairs[p].second].train.y));

  std::vector<std::size_t> selected(pairs.size());
  std::iota(selected.begin(), selected.end(), 0);
  if (config.influence_top_k > 0 && config.influence_top_k < pairs.size()) {
    std::stable_sort(selected.begin(), selected.end(), [&](std::size_t x, std::size_t y) {
      return std::abs(correlation[x].value) > std::abs(correlation[y].value);
    });
    selected.resize(config.influence_top_k);
    std::sort(selected.begin(), selected.end());
  }
  std::vector<double> influence_values(pairs.size(), 0.0);
  parallel_for(selected.size(), config.threads, [&](std::size_t k) {
    const auto [i, j] = pairs[selected[k]];
    influence_values[selected[k]] =
        pair_influence(net.stock_nodes[i], net.stock_nodes[j], data[i], data[j], config.svm).influence;
  });

  net.stock_stock_edges.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    net.stock_stock_edges.push_back(
        {net.stock_nodes[i], net.stock_nodes[j],
         combine_edge_weight(correlation[p].value, influence_values[p], config.lambda),
         correlation[p].value, influence_values[p]});
  }
  net.validate();
  auto pruned = prune_edges(net, config.prune);
  if (!stock_subgraph_connected(pruned)) throw InputError("network: pruning disconnected the graph");
  return pruned;
}

// ---------------------------------------------------------------------------
// Serialization

std::string network_to_json(const PredictionNetwork& network) {
  nlohmann::json doc;
  doc["index_nodes"] = network.index_nodes;
  doc["stock_nodes"] = network.stock_nodes;
  auto& si = doc["stock_index_edges"] = nlohmann::json::array();
  for (const auto& e : network.stock_index_edges)
    si.push_back({{"index", e.index}, {"stock", e.stock}, {"weight", e.weight}});
  auto& ss = doc["stock_stock_edges"] = nlohmann::json::array();
  for (const auto& e : network.stock_stock_edges)
    ss.push_back({{"a", e.a},
                  {"b", e.b},
                  {"weight", e.weight},
                  {"correlation", e.correlation},
                  {"influence", e.influence}});
  doc["lambda"] = network.lambda;
  doc["built_on"] = network.built_on.iso();
  return doc.dump(2);
}

PredictionNetwork network_from_json(std::string_view text) {
  PredictionNetwork net;
  try {
    const auto doc = nlohmann::json::parse(text);
    net.index_nodes = doc.at("index_nodes").get<std::vector<std::string>>();
    net.stock_nodes = doc.at("stock_nodes").get<std::vector<std::string>>();
    for (const auto& e : doc.at("stock_index_edges"))
      net.stock_index_edges.push_back(
          {e.at("index").get<std::string>(), e.at("stock").get<std::string>(), e.at("weight").get<double>()});
    for (const auto& e : doc.at("stock_stock_edges"))
      net.stock_stock_edges.push_back({e.at("a").get<std::string>(), e.at("b").get<std::string>(),
                                       e.at("weight").get<double>(), e.value("correlation", 0.0),
                                       e.value("influence", 0.0)});
    net.lambda = doc.at("lambda").get<double>();
    net.built_on = Date::parse(doc.at("built_on").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network: ") + e.what(), 0);
  }
  net.validate();
  return net;
}

double index_level(const IndexSpec& index, const std::map<std::string, double>& market_caps,
                   const BarSet& bars, DayIndex day, DayIndex reference_day) {
  double level = 0.0;
  if (index.weighting == Weighting::PriceWeighted) {
    for (const auto& s : index.constituents) level += bars.at(s).close.at(day);
    return level / static_cast<double>(index.constituents.size());
  }
  double total_cap = 0.0;
  for (const auto& s : index.constituents) {
    const auto& series = bars.at(s);
    const double cap = market_caps.at(s);
    level += cap * series.close.at(day) / series.close.at(reference_day);
    total_cap += cap;
  }
  return level / total_cap;
}

}  // namespace netpred
