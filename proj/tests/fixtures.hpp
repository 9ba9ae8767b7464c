#pragma once

#include <algorithm>
#include <chrono>
#include <sstream>
#include <string>
#include <vector>

#include "netpred/market_data.hpp"
#include "netpred/rng.hpp"

namespace fixtures {

/// Valid bars from a close path: open = previous close, high/low pad the body.
inline netpred::BarSeries bars_from_closes(const std::string& symbol, const std::vector<double>& closes,
                                           double volume = 1000.0) {
  netpred::BarSeries s;
  s.symbol = symbol;
  netpred::Date day(2021, 1, 4);
  for (std::size_t t = 0; t < closes.size(); ++t) {
    s.dates.emplace_back(day.days() + std::chrono::days(static_cast<int>(t)));
    const double open = t ? closes[t - 1] : closes[t];
    s.open.push_back(open);
    s.close.push_back(closes[t]);
    s.high.push_back(std::max(open, closes[t]) + 0.5);
    s.low.push_back(std::min(open, closes[t]) - 0.5);
    s.volume.push_back(volume);
  }
  return s;
}

inline std::vector<double> random_walk(std::size_t n, std::uint64_t seed, double start = 100.0) {
  netpred::Rng rng(seed);
  std::vector<double> out{start};
  while (out.size() < n) out.push_back(out.back() * (1.0 + 0.02 * (rng.uniform() - 0.5)));
  return out;
}

inline netpred::BarSet bar_set(std::vector<netpred::BarSeries> series) {
  netpred::BarSet set;
  set.calendar = netpred::Calendar(series.front().dates);
  std::sort(series.begin(), series.end(), [](auto& a, auto& b) { return a.symbol < b.symbol; });
  set.series = std::move(series);
  return set;
}

}  // namespace fixtures

namespace fixtures {

/// Bars whose close-to-close signs follow `moves` (index 0 unused) and whose
/// close - open sign on each day equals `hints`.
inline netpred::BarSeries bars_from_moves(const std::string& symbol, const std::vector<int>& moves,
                                          const std::vector<int>& hints, std::uint64_t seed) {
  netpred::Rng rng(seed);
  netpred::BarSeries s;
  s.symbol = symbol;
  double close = 100.0;
  for (std::size_t t = 0; t < moves.size(); ++t) {
    s.dates.emplace_back(netpred::Date(2020, 1, 1).days() + std::chrono::days(static_cast<int>(t)));
    if (t > 0) close *= 1.0 + moves[t] * 0.01 * (1.0 + 0.5 * rng.uniform());
    const double open = close * (1.0 - hints[t] * 0.003 * (1.0 + rng.uniform()));
    s.open.push_back(open);
    s.close.push_back(close);
    s.high.push_back(std::max(open, close) * 1.001);
    s.low.push_back(std::min(open, close) * 0.999);
    s.volume.push_back(1000.0 + 100.0 * rng.uniform());
  }
  return s;
}

inline std::vector<int> coin_flips(std::size_t n, netpred::Rng& rng) {
  std::vector<int> out(n);
  for (auto& v : out) v = rng.bernoulli(0.5) ? 1 : -1;
  return out;
}

}  // namespace fixtures
