#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <optional>

#include "fedwatch/analytics.hpp"
#include "fedwatch/codec.hpp"
#include "fedwatch/features.hpp"
#include "fedwatch/learners.hpp"
#include "fedwatch/policy.hpp"
#include "fedwatch/stats.hpp"
#include "fedwatch/store.hpp"
#include "fedwatch/synthcorpus.hpp"
#include "fedwatch/watchgen.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;
using namespace fedwatch;

namespace {

// JSON crosses the boundary as text; the Python layer decodes it.
json parse_arg(const std::string& text, const char* what) {
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError(std::string(what) + " is not valid JSON");
  return j;
}

Store open_existing(const fs::path& root) {
  if (!fs::exists(root / "snapshots.ndjson") && !fs::exists(root / "meta.json"))
    throw Error("no store at " + root.string());
  return Store::open(root);
}

std::string features_json(const Store& store, std::optional<Timestamp> begin, std::optional<Timestamp> end) {
  const auto obs = Observation::of(store);
  const TimeWindow window{begin.value_or(obs.start), end.value_or(obs.full().end)};
  if (window.end <= window.begin) throw ValidationError("end must be after begin");
  const FeatureExtractor fx(store);
  std::vector<std::pair<InstanceRef, FeatureVector>> rows;
  for (const auto& inst : store.instances())
    if (fx.has_snapshot_in(inst, window)) rows.emplace_back(inst, fx.extract(inst, window));
  if (rows.empty()) throw Error("no instance has a successful snapshot in the window");
  std::vector<FeatureVector> raw;
  for (const auto& [_, fv] : rows) raw.push_back(fv);
  const auto lambdas = BoxCoxLambdas::fit(raw);
  json out = {{"columns", json::array()}, {"rows", json::object()}, {"lambdas", lambdas}};
  for (auto name : kFeatureNames) out["columns"].push_back(std::string(name));
  for (auto& [inst, fv] : rows) {
    lambdas.apply(fv);
    out["rows"][inst.domain()] = fv.values;
  }
  return out.dump();
}

std::pair<TrainedModel, std::string> train_global(const Store& store, const std::string& family_name,
                                                  std::uint64_t seed, double train_fraction,
                                                  const std::string& grid_text, bool ablate_posts) {
  const Family family = family_from_string(family_name);
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must be in (0, 1)");
  HyperGrid grid = HyperGrid::standard(family);
  if (!grid_text.empty()) grid = HyperGrid::restricted(family, parse_arg(grid_text, "grid"));
  auto data = build_global_dataset(store, train_fraction, seed);
  if (ablate_posts) {
    data.train = ablate_post_features(data.train);
    data.test = ablate_post_features(data.test);
  }
  auto e = run_experiment(family, data, grid, seed);
  json cv = json::array();
  for (const auto& r : e.model.cv) cv.push_back({{"params", r.params}, {"mean_f1", r.mean_f1}});
  const json metrics = {{"family", std::string(to_string(family))},
                        {"test", e.test},
                        {"train_rows", e.train_rows},
                        {"test_rows", e.test_rows},
                        {"test_positives", e.test_positives},
                        {"params", e.model.params},
                        {"cv", cv}};
  return {std::move(e.model), metrics.dump()};
}

std::string lags_json(const Store& store) {
  json out = json::array();
  for (const auto& r : response_lags(store))
    out.push_back({{"source", r.source.domain()},
                   {"target", r.target.domain()},
                   {"federated_at", r.federated_at},
                   {"policy_at", r.policy_at},
                   {"lag_days", r.lag_days}});
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the fedwatch toolkit";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<StoreError>(m, "StoreError", error.ptr());
  py::register_exception<UnsupportedFamily>(m, "UnsupportedFamily", error.ptr());
  py::register_exception<UndefinedStatistic>(m, "UndefinedStatistic", error.ptr());

  py::class_<Store>(m, "Store")
      .def_static("open", &open_existing, py::arg("path"))
      .def("instances",
           [](const Store& s) {
             std::vector<std::string> out;
             for (const auto& i : s.instances()) out.push_back(i.domain());
             return out;
           })
      .def_property_readonly("n_snapshots", [](const Store& s) { return s.snapshots().size(); })
      .def_property_readonly("n_edges", [](const Store& s) { return s.edges().size(); })
      .def_property_readonly("n_posts", [](const Store& s) { return s.posts().size(); })
      .def("time_span", &Store::time_span);

  py::class_<TrainedModel>(m, "Model")
      .def_static("load", &TrainedModel::load, py::arg("path"))
      .def("save", &TrainedModel::save, py::arg("path"))
      .def_property_readonly("family", [](const TrainedModel& t) { return std::string(to_string(t.family)); })
      .def_property_readonly("header", [](const TrainedModel& t) { return t.header; })
      .def_property_readonly("params_json", [](const TrainedModel& t) { return t.params.dump(); })
      .def("predict_proba",
           [](const TrainedModel& t, const std::vector<double>& row) {
             if (row.size() != t.header.size()) throw ValidationError("row length differs from the model header");
             return t.predict_proba(row);
           })
      .def("importance", &feature_importance);

  m.def("synth_json",
        [](const std::string& params_text, const fs::path& out) {
          const auto params = parse_arg(params_text, "params").get<CorpusParams>();
          return json(write_corpus(params, out)).dump();
        },
        py::arg("params_json"), py::arg("out"), py::call_guard<py::gil_scoped_release>());
  m.def("features_json", &features_json, py::arg("store"), py::arg("begin") = std::nullopt,
        py::arg("end") = std::nullopt, py::call_guard<py::gil_scoped_release>());
  m.def("train_global", &train_global, py::arg("store"), py::arg("family"), py::arg("seed") = 1,
        py::arg("train_fraction") = 0.8, py::arg("grid_json") = "", py::arg("ablate_posts") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("watchlist_json",
        [](const TrainedModel& model, const Store& store, double threshold, std::optional<std::size_t> top_k) {
          const auto candidates = candidate_rows(store, model);
          return watchlist_json(generate_watchlist(model, candidates, threshold, top_k)).dump();
        },
        py::arg("model"), py::arg("store"), py::arg("threshold") = ml::kDecisionThreshold,
        py::arg("top_k") = std::nullopt, py::call_guard<py::gil_scoped_release>());
  m.def("lags_json", &lags_json, py::arg("store"), py::call_guard<py::gil_scoped_release>());
  m.def("classify_default", &classify_default, py::arg("policy"), py::arg("version"));
  m.def("box_cox", &box_cox, py::arg("x"), py::arg("lmbda"));
  m.def("fit_box_cox", [](const std::vector<double>& v) { return fit_box_cox(v); }, py::arg("values"));
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
        py::arg("x"), py::arg("y"));
}
