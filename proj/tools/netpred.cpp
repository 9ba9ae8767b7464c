#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "netpred/errors.hpp"
#include "netpred/forecasting.hpp"
#include "netpred/harness.hpp"
#include "netpred/synthetic.hpp"

namespace {

using netpred::RunConfig;

struct CommonFlags {
  std::string config, bars, manifest, out, variant;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::size_t k_neighbors = 0, k_clusters = 0, train_len = 0, validation_len = 0;
  std::size_t rebuild_days = 0, weight_days = 0, threads = 0, constituents = 0;
  bool no_timings = false;
  std::vector<CLI::Option*> options;

  bool given(const char* name) const {
    for (auto* o : options)
      if (o->check_name(name) && o->count() > 0) return true;
    return false;
  }
};

void add_common(CLI::App* app, CommonFlags& f) {
  f.options = {
      app->add_option("--config", f.config, "JSON run configuration; flags override it"),
      app->add_option("--bars", f.bars, "bars CSV"),
      app->add_option("--manifest", f.manifest, "universe manifest JSON"),
      app->add_option("--seed", f.seed, "global RNG seed"),
      app->add_option("--lambda", f.lambda, "influence weight in (0, 1)"),
      app->add_option("--k-neighbors", f.k_neighbors, "neighbours per node in the similarity network"),
      app->add_option("--k-clusters", f.k_clusters, "number of clusters (seeds) per day"),
      app->add_option("--train-len", f.train_len, "training window in trading days"),
      app->add_option("--validation-len", f.validation_len, "validation window in trading days"),
      app->add_option("--rebuild-days", f.rebuild_days, "network rebuild cadence in test days"),
      app->add_option("--weight-days", f.weight_days, "edge weight refresh cadence in test days"),
      app->add_option("--threads", f.threads, "worker threads (0 = all cores)"),
      app->add_option("--variant", f.variant, "ablation variant"),
      app->add_option("--constituents-per-index", f.constituents, "required constituents per index (0 = any)"),
      app->add_option("--out", f.out, "output file or directory"),
      app->add_flag("--no-timings", f.no_timings, "omit wall-clock timings from reports"),
  };
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw netpred::InputError("cannot open config " + f.config);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw netpred::ParseError(f.config + ": " + e.what(), 0);
    }
    c = netpred::run_config_from_json(doc);
    const auto base = std::filesystem::path(f.config).parent_path();
    if (!c.bars_path.empty() && c.bars_path.is_relative()) c.bars_path = base / c.bars_path;
    if (!c.manifest_path.empty() && c.manifest_path.is_relative()) c.manifest_path = base / c.manifest_path;
  }
  auto& fc = c.forecast;
  if (f.given("--bars")) c.bars_path = f.bars;
  if (f.given("--manifest")) c.manifest_path = f.manifest;
  if (f.given("--seed")) fc.seed = f.seed;
  if (f.given("--lambda")) fc.network.lambda = f.lambda;
  if (f.given("--k-neighbors")) fc.k_neighbors = f.k_neighbors;
  if (f.given("--k-clusters")) fc.k_clusters = f.k_clusters;
  if (f.given("--train-len")) fc.train_len = f.train_len;
  if (f.given("--validation-len")) fc.validation_len = f.validation_len;
  if (f.given("--rebuild-days")) c.rebuild_days = f.rebuild_days;
  if (f.given("--weight-days")) c.weight_refresh_days = f.weight_days;
  if (f.given("--threads")) fc.threads = f.threads;
  if (f.given("--variant")) fc.variant = netpred::parse_variant(f.variant);
  if (f.given("--constituents-per-index")) c.constituents_per_index = f.constituents;
  if (f.no_timings) c.include_timings = false;
  if (c.bars_path.empty() || c.manifest_path.empty())
    throw netpred::InputError("--bars and --manifest (or a config naming them) are required");
  c.validate();
  return c;
}

void emit(const CommonFlags& f, const std::string& text) {
  if (f.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(f.out);
  if (!out) throw netpred::InputError("cannot write " + f.out);
  out << text;
}

netpred::DayIndex day_of(const netpred::PipelineState& state, const std::string& iso) {
  return state.calendar().index_of(netpred::Date::parse(iso));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Index movement forecasting on stock prediction networks"};
  app.require_subcommand(1);

  CommonFlags ingest_flags, graph_flags, forecast_flags, eval_flags, sweep_flags, ablate_flags;
  auto* ingest = app.add_subcommand("ingest", "validate bars and manifest and summarize them");
  add_common(ingest, ingest_flags);

  std::string graph_day;
  auto* graph = app.add_subcommand("build-graph", "build the prediction network for a day");
  add_common(graph, graph_flags);
  graph->add_option("--day", graph_day, "anchor day (YYYY-MM-DD); data strictly before it is used")->required();

  std::string forecast_date;
  auto* forecast = app.add_subcommand("forecast", "forecast index movements for one day");
  add_common(forecast, forecast_flags);
  forecast->add_option("--day", forecast_date, "day to forecast (YYYY-MM-DD)")->required();

  std::string from, to;
  std::size_t test_days = 0;
  std::vector<std::size_t> k_sweep;
  auto* evaluate = app.add_subcommand("evaluate", "walk-forward evaluation over a test range");
  add_common(evaluate, eval_flags);
  evaluate->add_option("--from", from, "first test day (YYYY-MM-DD)");
  evaluate->add_option("--to", to, "last test day (YYYY-MM-DD)");
  evaluate->add_option("--test-days", test_days, "test the last N trading days");
  evaluate->add_option("--k-clusters-sweep", k_sweep, "choose k_clusters from these on validation days")
      ->delimiter(',');

  std::vector<double> lambdas;
  std::string sweep_from, sweep_to;
  std::size_t sweep_days = 0;
  auto* sweep = app.add_subcommand("sweep-lambda", "walk-forward evaluation for several lambda values");
  add_common(sweep, sweep_flags);
  sweep->add_option("--values", lambdas, "lambda values in (0, 1)")->delimiter(',')->required();
  sweep->add_option("--from", sweep_from, "first test day (YYYY-MM-DD)");
  sweep->add_option("--to", sweep_to, "last test day (YYYY-MM-DD)");
  sweep->add_option("--test-days", sweep_days, "test the last N trading days");

  std::string ablate_from, ablate_to;
  std::size_t ablate_days = 0;
  auto* ablate = app.add_subcommand("ablate", "walk-forward evaluation of an ablation variant");
  add_common(ablate, ablate_flags);
  ablate->add_option("--from", ablate_from, "first test day (YYYY-MM-DD)");
  ablate->add_option("--to", ablate_to, "last test day (YYYY-MM-DD)");
  ablate->add_option("--test-days", ablate_days, "test the last N trading days");

  std::string spec_path, synth_out = "synthetic";
  auto* synth = app.add_subcommand("synth", "write a planted synthetic market");
  synth->add_option("--spec", spec_path, "synthetic market spec JSON")->required();
  synth->add_option("--out", synth_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  auto set_range = [](RunConfig& c, const std::string& a, const std::string& b, std::size_t n) {
    if (!a.empty()) c.from = netpred::Date::parse(a);
    if (!b.empty()) c.to = netpred::Date::parse(b);
    if (n > 0) c.test_days = n;
  };

  try {
    if (*ingest) {
      const auto config = resolve(ingest_flags);
      const auto state = netpred::load_pipeline(config);
      const auto& cal = state.calendar();
      nlohmann::json summary{
          {"trading_days", cal.size()},
          {"first_day", cal.size() ? cal[0].iso() : ""},
          {"last_day", cal.size() ? cal[cal.size() - 1].iso() : ""},
          {"series", state.bars().series.size()},
          {"stocks", state.stocks().size()},
          {"first_forecast_day_index",
           state.first_forecast_day(config.forecast.train_len, config.forecast.validation_len)},
      };
      for (const auto& index : state.manifest().indices)
        summary["indices"][index.id] = {
            {"constituents", index.constituents.size()},
            {"weighting", index.weighting == netpred::Weighting::CapWeighted ? "cap" : "price"},
            {"has_bars", state.index_signal(index.id) != nullptr}};
      emit(ingest_flags, summary.dump(2));
    } else if (*graph) {
      const auto config = resolve(graph_flags);
      const auto state = netpred::load_pipeline(config);
      const auto network = netpred::build_network_for_day(state, day_of(state, graph_day), config.forecast);
      emit(graph_flags, netpred::network_to_json(network));
    } else if (*forecast) {
      const auto config = resolve(forecast_flags);
      const auto state = netpred::load_pipeline(config);
      const auto result = netpred::forecast_day(state, day_of(state, forecast_date), config.forecast);
      emit(forecast_flags, netpred::forecast_to_json(result, config.include_timings));
    } else if (*evaluate) {
      auto config = resolve(eval_flags);
      set_range(config, from, to, test_days);
      if (!k_sweep.empty()) config.k_clusters_sweep = k_sweep;
      const auto report = netpred::walk_forward(config);
      emit(eval_flags, netpred::report_to_json(report, config.include_timings));
    } else if (*sweep) {
      auto config = resolve(sweep_flags);
      set_range(config, sweep_from, sweep_to, sweep_days);
      const auto state = netpred::load_pipeline(config);
      emit(sweep_flags, netpred::sweep_csv(netpred::lambda_sweep(state, config, lambdas)));
    } else if (*ablate) {
      auto config = resolve(ablate_flags);
      set_range(config, ablate_from, ablate_to, ablate_days);
      const auto state = netpred::load_pipeline(config);
      const auto report = netpred::ablation_run(state, config, config.forecast.variant);
      emit(ablate_flags, netpred::report_to_json(report, config.include_timings));
    } else if (*synth) {
      std::ifstream in(spec_path);
      if (!in) throw netpred::InputError("cannot open spec " + spec_path);
      std::stringstream text;
      text << in.rdbuf();
      const auto market = netpred::generate_synthetic_market(netpred::synthetic_spec_from_json(text.str()));
      netpred::write_synthetic_market(market, synth_out);
      std::cout << "wrote " << synth_out << "/bars.csv, manifest.json, truth.json\n";
    }
  } catch (const netpred::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
