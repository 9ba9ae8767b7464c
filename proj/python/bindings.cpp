#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netpred/errors.hpp"
#include "netpred/forecasting.hpp"
#include "netpred/harness.hpp"
#include "netpred/relations.hpp"
#include "netpred/state_clustering.hpp"
#include "netpred/synthetic.hpp"

namespace py = pybind11;

namespace {

netpred::RunConfig config_from(const std::string& text, const std::filesystem::path& base) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw netpred::ParseError(std::string("config: ") + e.what(), 0);
  }
  auto c = netpred::run_config_from_json(doc);
  if (!base.empty()) {
    if (c.bars_path.is_relative()) c.bars_path = base / c.bars_path;
    if (c.manifest_path.is_relative()) c.manifest_path = base / c.manifest_path;
  }
  c.validate();
  return c;
}

std::vector<netpred::Movement> movements(const std::vector<int>& signs) {
  std::vector<netpred::Movement> out;
  out.reserve(signs.size());
  for (int s : signs) {
    if (s != 1 && s != -1) throw netpred::InputError("movements must be +1 or -1");
    out.push_back(s == 1 ? netpred::Movement::Rise : netpred::Movement::Fall);
  }
  return out;
}

netpred::DayIndex day_of(const netpred::PipelineState& state, const std::string& iso) {
  return state.calendar().index_of(netpred::Date::parse(iso));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Index movement forecasting on stock prediction networks";

  auto base_error = py::register_exception<netpred::Error>(m, "NetpredError", PyExc_RuntimeError);
  py::register_exception<netpred::LookaheadError>(m, "LookaheadError", base_error.ptr());
  py::register_exception<netpred::WindowError>(m, "WindowError", base_error.ptr());
  py::register_exception<netpred::InputError>(m, "InputError", base_error.ptr());
  py::register_exception<netpred::ParseError>(m, "ParseError", base_error.ptr());

  m.def(
      "pearson_correlation",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = netpred::pearson_correlation(std::span<const double>(a), std::span<const double>(b));
        return py::make_tuple(r.value, r.degenerate);
      },
      py::arg("a"), py::arg("b"), "Returns (correlation, degenerate).");
  m.def("combine_edge_weight", &netpred::combine_edge_weight, py::arg("correlation"), py::arg("influence"),
        py::arg("lam"));
  m.def("influence_from_accuracies", &netpred::influence_from_accuracies, py::arg("acc_raw_i"),
        py::arg("acc_raw_j"), py::arg("acc_proc_i"), py::arg("acc_proc_j"));
  m.def(
      "rbf_similarity",
      [](const std::vector<double>& a, const std::vector<double>& b, double gamma) {
        return netpred::rbf_similarity(a, b, gamma);
      },
      py::arg("a"), py::arg("b"), py::arg("gamma"));
  m.def(
      "macro_f1",
      [](const std::vector<int>& predictions, const std::vector<int>& truth) {
        const auto p = movements(predictions);
        const auto t = movements(truth);
        return netpred::macro_f1(p, t);
      },
      py::arg("predictions"), py::arg("truth"));
  m.def(
      "adjusted_rand_index",
      [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        return netpred::adjusted_rand_index(a, b);
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "write_synthetic_market",
      [](const std::string& spec_json, const std::filesystem::path& directory) {
        const auto market = netpred::generate_synthetic_market(netpred::synthetic_spec_from_json(spec_json));
        netpred::write_synthetic_market(market, directory);
        return netpred::planted_truth_to_json(market.truth);
      },
      py::arg("spec_json"), py::arg("directory"), "Writes bars.csv, manifest.json, truth.json; returns truth JSON.");

  m.def(
      "build_graph",
      [](const std::string& config_json, const std::string& day, const std::filesystem::path& base) {
        const auto c = config_from(config_json, base);
        py::gil_scoped_release release;
        const auto state = netpred::load_pipeline(c);
        return netpred::network_to_json(netpred::build_network_for_day(state, day_of(state, day), c.forecast));
      },
      py::arg("config_json"), py::arg("day"), py::arg("base") = std::filesystem::path{});
  m.def(
      "forecast",
      [](const std::string& config_json, const std::string& day, const std::filesystem::path& base) {
        const auto c = config_from(config_json, base);
        py::gil_scoped_release release;
        const auto state = netpred::load_pipeline(c);
        return netpred::forecast_to_json(netpred::forecast_day(state, day_of(state, day), c.forecast),
                                         c.include_timings);
      },
      py::arg("config_json"), py::arg("day"), py::arg("base") = std::filesystem::path{});
  m.def(
      "evaluate",
      [](const std::string& config_json, const std::filesystem::path& base) {
        const auto c = config_from(config_json, base);
        py::gil_scoped_release release;
        return netpred::report_to_json(netpred::walk_forward(c), c.include_timings);
      },
      py::arg("config_json"), py::arg("base") = std::filesystem::path{});
  m.def(
      "sweep_lambda",
      [](const std::string& config_json, const std::vector<double>& values, const std::filesystem::path& base) {
        const auto c = config_from(config_json, base);
        py::gil_scoped_release release;
        const auto state = netpred::load_pipeline(c);
        return netpred::sweep_csv(netpred::lambda_sweep(state, c, values));
      },
      py::arg("config_json"), py::arg("values"), py::arg("base") = std::filesystem::path{});
  m.def(
      "ablate",
      [](const std::string& config_json, const std::string& variant, const std::filesystem::path& base) {
        const auto c = config_from(config_json, base);
        const auto v = netpred::parse_variant(variant);
        py::gil_scoped_release release;
        const auto state = netpred::load_pipeline(c);
        return netpred::report_to_json(netpred::ablation_run(state, c, v), c.include_timings);
      },
      py::arg("config_json"), py::arg("variant"), py::arg("base") = std::filesystem::path{});
}
