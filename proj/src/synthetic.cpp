#include "netpred/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "netpred/errors.hpp"
#include "netpred/relations.hpp"
#include "netpred/rng.hpp"

namespace netpred {

void SyntheticMarketSpec::validate() const {
  if (n_indices == 0) throw InputError("synthetic: need at least one index");
  if (stocks_per_index < 2) throw InputError("synthetic: need at least two stocks per index");
  if (n_clusters == 0) throw InputError("synthetic: need at least one cluster");
  if (!(noise >= 0.0 && noise <= 0.5)) throw InputError("synthetic: noise must lie in [0, 0.5]");
  if (!(hint_noise >= 0.0 && hint_noise <= 0.5)) throw InputError("synthetic: hint_noise must lie in [0, 0.5]");
  if (!(informed_fraction >= 0.0 && informed_fraction <= 1.0))
    throw InputError("synthetic: informed_fraction must lie in [0, 1]");
  if (!(index_purity > 0.0 && index_purity <= 1.0)) throw InputError("synthetic: index_purity must lie in (0, 1]");
  if (2 * lead_lag_pairs > n_indices * stocks_per_index)
    throw InputError("synthetic: too many lead-lag pairs for the stock count");
  if (days < kMinFeatureHistory) throw InputError("synthetic: too few days for feature warm-up");
}

SyntheticMarketSpec synthetic_spec_from_json(std::string_view text) {
  SyntheticMarketSpec spec;
  try {
    const auto doc = nlohmann::json::parse(text);
    spec.n_indices = doc.value("n_indices", spec.n_indices);
    spec.stocks_per_index = doc.value("stocks_per_index", spec.stocks_per_index);
    spec.n_clusters = doc.value("n_clusters", spec.n_clusters);
    spec.lead_lag_pairs = doc.value("lead_lag_pairs", spec.lead_lag_pairs);
    spec.noise = doc.value("noise", spec.noise);
    spec.hint_noise = doc.value("hint_noise", spec.hint_noise);
    spec.days = doc.value("days", spec.days);
    spec.seed = doc.value("seed", spec.seed);
    spec.informed_fraction = doc.value("informed_fraction", spec.informed_fraction);
    spec.index_purity = doc.value("index_purity", spec.index_purity);
    spec.index_bars = doc.value("index_bars", spec.index_bars);
    if (doc.contains("start")) spec.start = Date::parse(doc.at("start").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synthetic spec: ") + e.what(), 0);
  }
  spec.validate();
  return spec;
}

std::string synthetic_spec_to_json(const SyntheticMarketSpec& spec) {
  return nlohmann::json{{"n_indices", spec.n_indices},
                        {"stocks_per_index", spec.stocks_per_index},
                        {"n_clusters", spec.n_clusters},
                        {"lead_lag_pairs", spec.lead_lag_pairs},
                        {"noise", spec.noise},
                        {"hint_noise", spec.hint_noise},
                        {"days", spec.days},
                        {"seed", spec.seed},
                        {"informed_fraction", spec.informed_fraction},
                        {"index_purity", spec.index_purity},
                        {"index_bars", spec.index_bars},
                        {"start", spec.start.iso()}}
      .dump(2);
}

namespace {

std::vector<Date> weekdays(Date start, std::size_t count) {
  std::vector<Date> out;
  out.reserve(count);
  auto day = start.days();
  while (out.size() < count) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(day);
    day += std::chrono::days{1};
  }
  return out;
}

std::string numbered(std::string_view prefix, std::size_t i, int width) {
  std::ostringstream s;
  s << prefix << std::setw(width) << std::setfill('0') << i;
  return s.str();
}

int flip(int value, Rng& rng, double p) { return rng.bernoulli(p) ? -value : value; }
int coin(Rng& rng) { return rng.bernoulli(0.5) ? 1 : -1; }

}  // namespace

SyntheticMarket generate_synthetic_market(const SyntheticMarketSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n_stocks = spec.n_indices * spec.stocks_per_index;
  const std::size_t C = spec.n_clusters;
  const std::size_t T = spec.days;
  SyntheticMarket market;
  auto& truth = market.truth;

  // Universe: disjoint constituents; the first share of each index comes from
  // its home cluster, the rest cycles over the other clusters.
  std::vector<std::string> names(n_stocks);
  std::vector<std::size_t> cluster(n_stocks);
  const auto home_count =
      static_cast<std::size_t>(std::llround(spec.index_purity * static_cast<double>(spec.stocks_per_index)));
  for (std::size_t i = 0; i < spec.n_indices; ++i) {
    IndexSpec index;
    index.id = numbered("IDX", i, 1);
    index.weighting = i % 2 == 0 ? Weighting::CapWeighted : Weighting::PriceWeighted;
    const std::size_t home = i % C;
    for (std::size_t m = 0; m < spec.stocks_per_index; ++m) {
      const std::size_t s = i * spec.stocks_per_index + m;
      names[s] = numbered("S", s, 3);
      cluster[s] = (m < home_count || C == 1) ? home : (home + 1 + (m - home_count) % (C - 1)) % C;
      index.constituents.push_back(names[s]);
      truth.stock_cluster[names[s]] = cluster[s];
    }
    market.manifest.indices.push_back(std::move(index));
  }
  for (std::size_t s = 0; s < n_stocks; ++s) market.manifest.market_caps[names[s]] = 1e9 * (1.0 + rng.uniform());

  std::vector<std::size_t> order(n_stocks);
  for (std::size_t s = 0; s < n_stocks; ++s) order[s] = s;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::optional<std::size_t>> leader(n_stocks);
  for (std::size_t p = 0; p < spec.lead_lag_pairs; ++p) {
    leader[order[2 * p + 1]] = order[2 * p];
    truth.lead_lag.emplace_back(names[order[2 * p]], names[order[2 * p + 1]]);
  }
  std::vector<bool> informed(n_stocks);
  for (std::size_t s = 0; s < n_stocks; ++s) informed[s] = !leader[s] && rng.uniform() < spec.informed_fraction;

  truth.drivers.assign(C, std::vector<int>(T + 1, 0));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 1; t <= T; ++t) truth.drivers[c][t] = coin(rng);

  // Close-to-close moves, then hints; day T's driver only feeds the last hint.
  std::vector<std::vector<int>> move(n_stocks, std::vector<int>(T, 0));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < n_stocks; ++s)
      if (!leader[s]) move[s][t] = flip(truth.drivers[cluster[s]][t], rng, spec.noise);
    for (std::size_t s = 0; s < n_stocks; ++s)
      if (leader[s]) move[s][t] = t >= 2 ? move[*leader[s]][t - 1] : coin(rng);
  }

  const auto dates = weekdays(spec.start, T);
  market.bars.calendar = Calendar(dates);
  for (std::size_t s = 0; s < n_stocks; ++s) {
    BarSeries bars;
    bars.symbol = names[s];
    bars.dates = dates;
    double close = rng.uniform(80.0, 120.0);
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0) close *= 1.0 + move[s][t] * 0.01 * (1.0 + 0.5 * rng.uniform());
      const int hint = informed[s] ? flip(truth.drivers[cluster[s]][t + 1], rng, spec.hint_noise) : coin(rng);
      const double open = close * (1.0 - hint * 0.003 * (1.0 + rng.uniform()));
      bars.open.push_back(open);
      bars.close.push_back(close);
      bars.high.push_back(std::max(open, close) * (1.0 + 0.002 * rng.uniform()));
      bars.low.push_back(std::min(open, close) * (1.0 - 0.002 * rng.uniform()));
      bars.volume.push_back(std::round(1e6 * (0.5 + rng.uniform())));
    }
    bars.validate();
    market.bars.series.push_back(std::move(bars));
  }
  std::sort(market.bars.series.begin(), market.bars.series.end(),
            [](const auto& a, const auto& b) { return a.symbol < b.symbol; });

  std::vector<BarSeries> index_series;
  for (const auto& index : market.manifest.indices) {
    BarSeries bars;
    bars.symbol = index.id;
    bars.dates = dates;
    auto& movements = truth.index_movements[index.id];
    movements.assign(T, 0);
    for (std::size_t t = 0; t < T; ++t) {
      double o = 0.0, h = 0.0, l = 0.0, c = 0.0, v = 0.0, total = 0.0;
      for (const auto& name : index.constituents) {
        const auto& sb = market.bars.at(name);
        const double w = index.weighting == Weighting::CapWeighted
                             ? market.manifest.market_caps.at(name) / sb.close[0]
                             : 1.0;
        o += w * sb.open[t];
        h += w * sb.high[t];
        l += w * sb.low[t];
        c += w * sb.close[t];
        v += sb.volume[t];
        total += index.weighting == Weighting::CapWeighted ? market.manifest.market_caps.at(name) : 1.0;
      }
      bars.open.push_back(o / total);
      bars.high.push_back(h / total);
      bars.low.push_back(l / total);
      bars.close.push_back(index_level(index, market.manifest.market_caps, market.bars, t, 0));
      bars.volume.push_back(v);
      bars.high.back() = std::max({bars.high.back(), bars.open.back(), bars.close.back()});
      bars.low.back() = std::min({bars.low.back(), bars.open.back(), bars.close.back()});
      if (t > 0) movements[t] = sign_value(movement_of(bars.close[t] - bars.close[t - 1]));
    }
    bars.validate();
    index_series.push_back(std::move(bars));
  }
  if (spec.index_bars) {
    for (auto& s : index_series) market.bars.series.push_back(std::move(s));
    std::sort(market.bars.series.begin(), market.bars.series.end(),
              [](const auto& a, const auto& b) { return a.symbol < b.symbol; });
  }
  market.manifest.validate();
  return market;
}

std::string planted_truth_to_json(const PlantedTruth& truth) {
  nlohmann::json doc;
  doc["stock_cluster"] = truth.stock_cluster;
  doc["lead_lag"] = nlohmann::json::array();
  for (const auto& [leader, follower] : truth.lead_lag)
    doc["lead_lag"].push_back({{"leader", leader}, {"follower", follower}});
  doc["drivers"] = truth.drivers;
  doc["index_movements"] = truth.index_movements;
  return doc.dump();
}

void write_synthetic_market(const SyntheticMarket& market, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  auto open = [&](const char* name) {
    std::ofstream out(directory / name);
    if (!out) throw InputError("cannot write " + (directory / name).string());
    return out;
  };
  auto bars = open("bars.csv");
  write_bars_csv(bars, market.bars);
  open("manifest.json") << manifest_to_json(market.manifest) << '\n';
  open("truth.json") << planted_truth_to_json(market.truth) << '\n';
}

}  // namespace netpred
