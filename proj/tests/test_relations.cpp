#include <doctest.h>

#include <numeric>

#include "fixtures.hpp"
#include "netpred/errors.hpp"
#include "netpred/linear_svm.hpp"
#include "netpred/relations.hpp"
#include "oracles.hpp"

using namespace netpred;

namespace {

std::string node(std::size_t i) { return "s" + std::to_string(i); }

PredictionNetwork network_from(std::size_t n, const std::vector<oracle::Edge>& edges) {
  PredictionNetwork net;
  for (std::size_t i = 0; i < n; ++i) net.stock_nodes.push_back(node(i));
  std::sort(net.stock_nodes.begin(), net.stock_nodes.end());
  for (const auto& e : edges) {
    auto a = node(e.a), b = node(e.b);
    if (b < a) std::swap(a, b);
    net.stock_stock_edges.push_back({a, b, e.w, 0.0, 0.0});
  }
  std::sort(net.stock_stock_edges.begin(), net.stock_stock_edges.end(),
            [](auto& x, auto& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  return net;
}

std::set<std::pair<std::string, std::string>> edge_set(const PredictionNetwork& net) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& e : net.stock_stock_edges) out.emplace(e.a, e.b);
  return out;
}

std::set<std::pair<std::string, std::string>> edge_set(const std::vector<oracle::Edge>& edges) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& e : edges) {
    auto a = node(e.a), b = node(e.b);
    if (b < a) std::swap(a, b);
    out.emplace(a, b);
  }
  return out;
}

std::vector<int> pm(std::initializer_list<int> v) { return v; }

}  // namespace

TEST_CASE("pearson correlation examples") {
  const auto y = pm({1, -1, 1, 1, -1});
  std::vector<int> neg;
  for (int v : y) neg.push_back(-v);
  CHECK(pearson_correlation(std::span<const int>(y), std::span<const int>(y)).value == doctest::Approx(1.0));
  CHECK(pearson_correlation(std::span<const int>(y), std::span<const int>(neg)).value == doctest::Approx(-1.0));
  const auto a = pm({1, 1, -1, -1}), b = pm({1, -1, 1, -1});
  CHECK(std::abs(pearson_correlation(std::span<const int>(a), std::span<const int>(b)).value) < 1e-12);

  const auto flat = pm({1, 1, 1, 1});
  const auto r = pearson_correlation(std::span<const int>(flat), std::span<const int>(a));
  CHECK(r.value == 0.0);
  CHECK(r.degenerate);

  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(pearson_correlation(std::span<const double>(one), std::span<const double>(one)), InputError);
  const std::vector<double> two{1.0, 2.0};
  const std::vector<double> three{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(pearson_correlation(std::span<const double>(two), std::span<const double>(three)), InputError);
}

TEST_CASE("pearson correlation matches the summation oracle, is symmetric and bounded") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.index(30);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.bernoulli(0.5) ? 1.0 : -1.0;
      b[i] = rng.bernoulli(0.5) ? 1.0 : -1.0;
    }
    const double got = pearson_correlation(std::span<const double>(a), std::span<const double>(b)).value;
    REQUIRE(std::abs(got - oracle::pearson(a, b)) < 1e-9);
    REQUIRE(got == pearson_correlation(std::span<const double>(b), std::span<const double>(a)).value);
    REQUIRE(std::abs(got) <= 1.0 + 1e-12);
  }
}

TEST_CASE("margin classifier") {
  Rng rng(3);
  SUBCASE("separable toy set is fit exactly") {
    Eigen::MatrixXd X(40, 2);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) {
      const int cls = i % 2 ? 1 : -1;
      X(i, 0) = cls * (1.0 + rng.uniform());
      X(i, 1) = rng.normal();
      y[i] = cls;
    }
    const auto svm = LinearSvm::train(X, y, {});
    CHECK(svm.accuracy(X, y) == 1.0);
  }
  SUBCASE("labels independent of features stay near chance") {
    Eigen::MatrixXd X(400, 5);
    std::vector<int> y(400);
    for (int i = 0; i < 400; ++i) {
      for (int j = 0; j < 5; ++j) X(i, j) = rng.normal();
      y[i] = i % 2 ? 1 : -1;
    }
    rng.shuffle(std::span<int>(y));
    const auto svm = LinearSvm::train(X.topRows(200), std::span<const int>(y).first(200), {});
    const double acc = svm.accuracy(X.bottomRows(200), std::span<const int>(y).last(200));
    CHECK(acc >= 0.35);
    CHECK(acc <= 0.65);
  }
  SUBCASE("single-class input is degenerate") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 3);
    std::vector<int> y(10, 1);
    CHECK_THROWS_AS(LinearSvm::train(X, y, {}), DegenerateModelError);
  }
  SUBCASE("training is deterministic") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(60, 4);
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) y[i] = X(i, 0) + 0.3 * X(i, 1) > 0 ? 1 : -1;
    const auto a = LinearSvm::train(X, y, {}), b = LinearSvm::train(X, y, {});
    for (int i = 0; i < 60; ++i) CHECK(a.decision(std::span<const double>(X.row(i).eval().data(), 4)) ==
                                       b.decision(std::span<const double>(X.row(i).eval().data(), 4)));
  }
}

TEST_CASE("influence arithmetic") {
  CHECK(influence_from_accuracies(0.5, 0.6, 0.6, 0.7) == doctest::Approx(0.1));
  CHECK(influence_from_accuracies(0.55, 0.65, 0.55, 0.65) == 0.0);
}

TEST_CASE("a copied signal scores higher influence than an independent pair") {
  // Stock i carries a hint of its next move; stock j repeats i's moves with no
  // hint of its own; stock k moves independently.
  Rng rng(21);
  const std::size_t n = 200;
  const auto moves = fixtures::coin_flips(n + 1, rng);
  const auto other = fixtures::coin_flips(n, rng);
  std::vector<int> hint_i(n);
  for (std::size_t t = 0; t < n; ++t) hint_i[t] = moves[t + 1];
  const std::vector<int> m(moves.begin(), moves.begin() + static_cast<long>(n));
  const auto bars_i = fixtures::bars_from_moves("I", m, hint_i, 1);
  const auto bars_j = fixtures::bars_from_moves("J", m, fixtures::coin_flips(n, rng), 2);
  const auto bars_k = fixtures::bars_from_moves("K", other, fixtures::coin_flips(n, rng), 3);
  const auto fi = compute_features(bars_i, FeatureProfile::Classic);
  const auto fj = compute_features(bars_j, FeatureProfile::Classic);
  const auto fk = compute_features(bars_k, FeatureProfile::Classic);
  const auto li = LabelSeries::from_bars(bars_i), lj = LabelSeries::from_bars(bars_j);
  const auto lk = LabelSeries::from_bars(bars_k);
  Calendar cal(bars_i.dates);
  const auto split = rolling_windows(cal, n, 120, 40);
  const auto copied = influence(fi, fj, li, lj, split, {});
  const auto independent = influence(fi, fk, li, lk, split, {});
  CHECK(copied.acc_raw_i > 0.8);
  CHECK(copied.acc_proc_j > copied.acc_raw_j + 0.1);
  CHECK(copied.influence > independent.influence);
  CHECK(copied.influence == doctest::Approx(influence_from_accuracies(copied.acc_raw_i, copied.acc_raw_j,
                                                                      copied.acc_proc_i, copied.acc_proc_j)));
}

TEST_CASE("index edge weights") {
  UniverseManifest m;
  m.indices.push_back({"CAP", Weighting::CapWeighted, {"A", "B", "C"}});
  m.indices.push_back({"PX", Weighting::PriceWeighted, {"D", "E", "F"}});
  m.indices.push_back({"LOG", Weighting::CapWeighted, {"G", "H"}});
  m.market_caps = {{"A", 5e9}, {"B", 5e9}, {"C", 5e9}, {"G", 1e4}, {"H", 1e2}};
  const std::map<std::string, double> prices{{"A", 1}, {"B", 2}, {"C", 3}, {"D", 30}, {"E", 10},
                                             {"F", 10}, {"G", 1}, {"H", 1}};
  const auto edges = index_edge_weights(m, prices);
  std::map<std::string, double> w;
  for (const auto& e : edges) w[e.stock] = e.weight;
  CHECK(w["A"] == doctest::Approx(1.0 / 3));
  CHECK(w["D"] == doctest::Approx(0.6));
  CHECK(w["E"] == doctest::Approx(0.2));
  CHECK(std::abs(w["G"] - 4.0 / 6) < 1e-12);
  CHECK(std::abs(w["H"] - 2.0 / 6) < 1e-12);

  auto bad_price = prices;
  bad_price["E"] = 0.0;
  try {
    index_edge_weights(m, bad_price);
    FAIL("expected an input error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("E") != std::string::npos);
  }
  auto tiny_cap = m;
  tiny_cap.market_caps["G"] = 1.0;
  CHECK_THROWS_AS(index_edge_weights(tiny_cap, prices), InputError);
}

TEST_CASE("index edge weights match the oracle and sum to one") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    UniverseManifest m;
    const bool cap = rng.bernoulli(0.5);
    IndexSpec index{"I", cap ? Weighting::CapWeighted : Weighting::PriceWeighted, {}};
    std::map<std::string, double> prices;
    std::vector<double> values;
    const std::size_t k = 1 + rng.index(8);
    for (std::size_t i = 0; i < k; ++i) {
      const std::string s = "t" + std::to_string(i);
      index.constituents.push_back(s);
      const double v = cap ? std::pow(10.0, rng.uniform(1.0, 12.0)) : rng.uniform(1.0, 500.0);
      (cap ? m.market_caps[s] : prices[s]) = v;
      if (!cap) m.market_caps[s] = 1e6;
      prices[s] = cap ? 10.0 : v;
      values.push_back(v);
    }
    m.indices.push_back(index);
    const auto edges = index_edge_weights(m, prices);
    const auto want = oracle::index_weights(values, cap);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      REQUIRE(std::abs(edges[i].weight - want[i]) < 1e-9);
      sum += edges[i].weight;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("combined edge weight") {
  CHECK(combine_edge_weight(0.5, 0.1, 0.7) == doctest::Approx(0.22));
  CHECK(combine_edge_weight(0.3, 0.3, 0.5) == doctest::Approx(0.3));
  CHECK_THROWS_AS(combine_edge_weight(0.5, 0.1, 0.0), InputError);
  CHECK_THROWS_AS(combine_edge_weight(0.5, 0.1, 1.0), InputError);
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const double l = rng.uniform(0.001, 0.999), i = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
    REQUIRE(combine_edge_weight(c, i, l) == oracle::combine(c, i, l));
  }
}

TEST_CASE("pruning examples") {
  SUBCASE("tree keeps every edge") {
    const auto net = network_from(4, {{0, 1, 0.1}, {1, 2, 0.5}, {1, 3, 0.2}});
    CHECK(prune_edges(net).stock_stock_edges.size() == 3);
  }
  SUBCASE("triangle 1, 2, 3 drops only the lightest edge") {
    const auto out = prune_edges(network_from(3, {{0, 1, 1}, {1, 2, 2}, {0, 2, 3}}));
    CHECK(edge_set(out) == edge_set(std::vector<oracle::Edge>{{1, 2, 2}, {0, 2, 3}}));
  }
  SUBCASE("equal-weight triangle drops exactly one edge, chosen by node order") {
    const auto out = prune_edges(network_from(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}}));
    CHECK(out.stock_stock_edges.size() == 2);
    CHECK(!edge_set(out).contains({"s0", "s1"}));
  }
  SUBCASE("two stocks keep their single edge") {
    CHECK(prune_edges(network_from(2, {{0, 1, -0.4}})).stock_stock_edges.size() == 1);
  }
  SUBCASE("disconnected input is rejected") {
    CHECK_THROWS_AS(prune_edges(network_from(4, {{0, 1, 1}, {2, 3, 1}})), InputError);
  }
  SUBCASE("stock-index edges are never pruned") {
    auto net = network_from(3, {{0, 1, 1}, {1, 2, 2}, {0, 2, 3}});
    net.index_nodes = {"I"};
    net.stock_index_edges = {{"I", "s0", 0.5}, {"I", "s1", 0.5}};
    CHECK(prune_edges(net).stock_index_edges == net.stock_index_edges);
  }
}

TEST_CASE("pruning agrees with the remove-and-check simulator on random graphs") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(6);
    std::vector<oracle::Edge> edges;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (rng.bernoulli(0.7)) edges.push_back({a, b, rng.uniform(-1, 1)});
    if (!oracle::connected(n, edges)) continue;
    const auto net = network_from(n, edges);
    for (bool skip : {false, true}) {
      const auto got = prune_edges(net, skip ? PruneMode::SkipBridges : PruneMode::StopAtFirstBridge);
      REQUIRE(edge_set(got) == edge_set(oracle::prune(n, edges, skip)));
      REQUIRE(stock_subgraph_connected(got));
    }
    const auto kept = prune_edges(net);
    if (kept.stock_stock_edges.size() < edges.size()) {
      double min_kept = 1e9, max_removed = -1e9;
      for (const auto& e : kept.stock_stock_edges) min_kept = std::min(min_kept, e.weight);
      const auto kept_set = edge_set(kept);
      for (const auto& e : net.stock_stock_edges)
        if (!kept_set.contains({e.a, e.b})) max_removed = std::max(max_removed, e.weight);
      REQUIRE(max_removed <= min_kept);
    }
  }
}

TEST_CASE("K4 with distinct weights stays connected with at least three edges") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<oracle::Edge> edges;
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = a + 1; b < 4; ++b) edges.push_back({a, b, rng.uniform()});
    const auto out = prune_edges(network_from(4, edges));
    CHECK(stock_subgraph_connected(out));
    CHECK(out.stock_stock_edges.size() >= 3);
  }
}

namespace {

struct Universe {
  BarSet bars;
  std::vector<FeatureFrame> frames;
  std::vector<LabelSeries> labels;
  std::vector<StockInputs> inputs;
  std::map<std::string, double> prices;
};

Universe universe(const std::vector<std::string>& symbols, std::size_t days) {
  Universe u;
  std::vector<BarSeries> series;
  for (std::size_t i = 0; i < symbols.size(); ++i)
    series.push_back(fixtures::bars_from_closes(symbols[i], fixtures::random_walk(days, 100 + i)));
  u.bars = fixtures::bar_set(series);
  u.frames.reserve(symbols.size());
  u.labels.reserve(symbols.size());
  for (const auto& s : u.bars.series) {
    u.frames.push_back(compute_features(s, FeatureProfile::Classic));
    u.labels.push_back(LabelSeries::from_bars(s));
    u.prices[s.symbol] = s.close.back();
  }
  for (std::size_t i = 0; i < u.bars.series.size(); ++i)
    u.inputs.push_back({u.bars.series[i].symbol, u.frames[i], u.labels[i]});
  return u;
}

}  // namespace

TEST_CASE("building a network over indices that share a stock") {
  UniverseManifest m;
  m.indices.push_back({"I1", Weighting::CapWeighted, {"A", "B", "C"}});
  m.indices.push_back({"I2", Weighting::PriceWeighted, {"C", "D", "E"}});
  for (auto s : {"A", "B", "C", "D", "E"}) m.market_caps[s] = 1e9;
  const auto u = universe({"A", "B", "C", "D", "E"}, 140);
  const auto split = rolling_windows(u.bars.calendar, 140, 80, 20);
  NetworkConfig config;
  config.threads = 1;
  const auto net = build_prediction_network(m, u.inputs, split, u.prices, Date(2021, 6, 1), config);
  CHECK(net.index_nodes.size() == 2);
  CHECK(net.stock_nodes.size() == 5);
  std::size_t shared = 0;
  for (const auto& e : net.stock_index_edges) shared += e.stock == "C";
  CHECK(shared == 2);
  CHECK(stock_subgraph_connected(net));
  CHECK_NOTHROW(net.validate());

  for (const auto& e : net.stock_stock_edges)
    CHECK(e.weight == combine_edge_weight(e.correlation, e.influence, config.lambda));

  config.threads = 4;
  CHECK(build_prediction_network(m, u.inputs, split, u.prices, Date(2021, 6, 1), config) == net);

  const auto round_trip = network_from_json(network_to_json(net));
  CHECK(round_trip == net);
}

TEST_CASE("single index with two stocks keeps its only stock edge") {
  UniverseManifest m;
  m.indices.push_back({"I", Weighting::CapWeighted, {"A", "B"}});
  m.market_caps = {{"A", 1e9}, {"B", 2e9}};
  const auto u = universe({"A", "B"}, 120);
  const auto net = build_prediction_network(m, u.inputs, rolling_windows(u.bars.calendar, 120, 60, 20), u.prices,
                                            Date(2021, 1, 1), {});
  CHECK(net.stock_stock_edges.size() == 1);
}

TEST_CASE("network construction reports missing constituent features") {
  UniverseManifest m;
  m.indices.push_back({"I", Weighting::CapWeighted, {"A", "B", "Z"}});
  m.market_caps = {{"A", 1e9}, {"B", 2e9}, {"Z", 3e9}};
  const auto u = universe({"A", "B"}, 120);
  auto prices = u.prices;
  prices["Z"] = 1.0;
  CHECK_THROWS_AS(build_prediction_network(m, u.inputs, rolling_windows(u.bars.calendar, 120, 60, 20), prices,
                                           Date(2021, 1, 1), {}),
                  InputError);
}

TEST_CASE("index level follows the weighting formula") {
  const auto u = universe({"A", "B"}, 40);
  IndexSpec cap{"C", Weighting::CapWeighted, {"A", "B"}};
  IndexSpec px{"P", Weighting::PriceWeighted, {"A", "B"}};
  const std::map<std::string, double> caps{{"A", 1e9}, {"B", 3e9}};
  const auto& a = u.bars.at("A");
  const auto& b = u.bars.at("B");
  const double want_cap = (1e9 * a.close[20] / a.close[0] + 3e9 * b.close[20] / b.close[0]) / 4e9;
  CHECK(std::abs(index_level(cap, caps, u.bars, 20, 0) - want_cap) < 1e-12);
  CHECK(std::abs(index_level(px, caps, u.bars, 20, 0) - (a.close[20] + b.close[20]) / 2) < 1e-12);
}
