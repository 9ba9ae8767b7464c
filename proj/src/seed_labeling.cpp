#include "netpred/seed_labeling.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "netpred/errors.hpp"
#include "netpred/parallel.hpp"
#include "netpred/rng.hpp"

namespace netpred {
namespace {

std::uint64_t ticker_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool better(const CandidateScore& a, const CandidateScore& b) {
  if (*a.accuracy != *b.accuracy) return *a.accuracy > *b.accuracy;
  return a.symbol < b.symbol;
}

}  // namespace

double predictability_score(const RandomForest& model, const Dataset& validation) {
  if (validation.size() == 0) throw InputError("predictability: empty validation window");
  return model.accuracy(validation.X, validation.y);
}

std::vector<CandidateScore> score_candidates(std::span<const StockInputs> stocks, DayIndex anchor,
                                             const Calendar& calendar, const SeedConfig& config) {
  const auto split = rolling_windows(calendar, anchor, config.train_len, config.validation_len);
  if (split.train.begin < kFeatureWarmup + 1)
    throw WindowError("training window starts inside the feature warm-up",
                      kFeatureWarmup + 1 + config.train_len + config.validation_len, anchor);
  std::vector<CandidateScore> out(stocks.size());
  parallel_for(stocks.size(), config.threads, [&](std::size_t i) {
    const auto& s = stocks[i];
    out[i].symbol = s.symbol;
    const auto train = next_day_dataset(s.classic, s.labels, split.train);
    const auto validation = next_day_dataset(s.classic, s.labels, split.validation);
    ForestConfig forest = config.forest;
    forest.seed = Rng::derive(config.forest.seed, ticker_hash(s.symbol));
    try {
      const auto model = RandomForest::train(train.X, train.y, forest);
      out[i].accuracy = predictability_score(model, validation);
      out[i].prediction = model.predict(s.classic.row(anchor - 1)) > 0 ? Movement::Rise : Movement::Fall;
    } catch (const DegenerateModelError&) {
    }
  });
  return out;
}

SeedLabels select_cluster_seeds(std::span<const CandidateScore> scores,
                                const ClusterAssignment& clusters) {
  std::map<std::string_view, const CandidateScore*> by_symbol;
  for (const auto& s : scores) by_symbol[s.symbol] = &s;
  SeedLabels seeds;
  const auto members = clusters.members();
  for (std::size_t c = 0; c < members.size(); ++c) {
    const CandidateScore* best = nullptr;
    for (std::size_t m : members[c]) {
      const auto it = by_symbol.find(clusters.nodes[m]);
      if (it == by_symbol.end()) throw InputError("seed: no score for " + clusters.nodes[m]);
      const auto* candidate = it->second;
      if (!candidate->accuracy) continue;
      if (!best || better(*candidate, *best)) best = candidate;
    }
    if (!best) {
      seeds.skipped_clusters.push_back(c);
      continue;
    }
    seeds.labels[best->symbol] = *best->prediction;
    seeds.provenance[best->symbol] = {c, *best->accuracy};
  }
  return seeds;
}

SeedLabels select_top_seeds(std::span<const CandidateScore> scores, std::size_t k) {
  std::vector<const CandidateScore*> usable;
  for (const auto& s : scores)
    if (s.accuracy) usable.push_back(&s);
  std::sort(usable.begin(), usable.end(), [](auto* a, auto* b) { return better(*a, *b); });
  SeedLabels seeds;
  for (std::size_t r = 0; r < std::min(k, usable.size()); ++r) {
    seeds.labels[usable[r]->symbol] = *usable[r]->prediction;
    seeds.provenance[usable[r]->symbol] = {r, *usable[r]->accuracy};
  }
  return seeds;
}

SeedLabels select_random_seeds(std::span<const CandidateScore> scores, std::size_t k,
                               std::uint64_t seed) {
  std::vector<const CandidateScore*> usable;
  for (const auto& s : scores)
    if (s.accuracy) usable.push_back(&s);
  std::sort(usable.begin(), usable.end(), [](auto* a, auto* b) { return a->symbol < b->symbol; });
  Rng rng(seed);
  rng.shuffle(std::span<const CandidateScore*>(usable));
  SeedLabels seeds;
  for (std::size_t r = 0; r < std::min(k, usable.size()); ++r) {
    seeds.labels[usable[r]->symbol] = *usable[r]->prediction;
    seeds.provenance[usable[r]->symbol] = {r, *usable[r]->accuracy};
  }
  return seeds;
}

SeedLabels inject_seed_labels(const PredictionNetwork& network, const ClusterAssignment& clusters,
                              std::span<const StockInputs> stocks, DayIndex anchor,
                              const Calendar& calendar, const SeedConfig& config) {
  const std::set<std::string> clustered(clusters.nodes.begin(), clusters.nodes.end());
  for (const auto& s : clustered)
    if (!network.stock_position(s)) throw InputError("seed: " + s + " is not a network stock");
  std::vector<StockInputs> members;
  for (const auto& s : stocks)
    if (clustered.contains(s.symbol)) members.push_back(s);
  const auto scores = score_candidates(members, anchor, calendar, config);
  return select_cluster_seeds(scores, clusters);
}

}  // namespace netpred
