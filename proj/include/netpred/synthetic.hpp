#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "netpred/market_data.hpp"

namespace netpred {

/// Planted market used by tests and demos.
///
/// Every cluster has a fair +/-1 driver per day. A stock's close-to-close move
/// follows its cluster driver, flipped with probability `noise`. The sign of
/// close - open on day t hints at the driver of day t + 1 for informed stocks
/// (flipped with probability `hint_noise`) and is random for the rest. A follower in
/// a lead-lag pair repeats its leader's move one day later and carries no hint.
struct SyntheticMarketSpec {
  std::size_t n_indices = 2;
  std::size_t stocks_per_index = 20;
  std::size_t n_clusters = 4;
  std::size_t lead_lag_pairs = 0;
  double noise = 0.0;
  double hint_noise = 0.0;
  std::size_t days = 340;
  std::uint64_t seed = 1;
  double informed_fraction = 1.0;
  /// Share of an index's constituents drawn from its home cluster.
  double index_purity = 0.7;
  bool index_bars = true;
  Date start{2020, 1, 1};

  void validate() const;
};

SyntheticMarketSpec synthetic_spec_from_json(std::string_view text);
std::string synthetic_spec_to_json(const SyntheticMarketSpec& spec);

struct PlantedTruth {
  std::map<std::string, std::size_t> stock_cluster;
  std::vector<std::pair<std::string, std::string>> lead_lag;  // (leader, follower)
  std::vector<std::vector<int>> drivers;                      // [cluster][day], day 0 unused
  std::map<std::string, std::vector<int>> index_movements;    // [index][day], day 0 unused
};

struct SyntheticMarket {
  BarSet bars;
  UniverseManifest manifest;
  PlantedTruth truth;
};

SyntheticMarket generate_synthetic_market(const SyntheticMarketSpec& spec);

std::string planted_truth_to_json(const PlantedTruth& truth);

/// Writes bars.csv, manifest.json and truth.json into `directory`.
void write_synthetic_market(const SyntheticMarket& market, const std::filesystem::path& directory);

}  // namespace netpred
