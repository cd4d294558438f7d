#include "fedwatch/learners.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fedwatch {

using nlohmann::json;

std::string_view to_string(Family f) {
  switch (f) {
    case Family::lr: return "lr";
    case Family::mlp: return "mlp";
    case Family::rf: return "rf";
    case Family::gbt: return "gbt";
  }
  return "lr";
}

Family family_from_string(std::string_view s) {
  for (Family f : kAllFamilies)
    if (to_string(f) == s) return f;
  throw Error("unknown model family '" + std::string(s) + "' (expected lr, mlp, rf or gbt)");
}

bool explainable(Family f) { return f != Family::mlp; }

// ---------------------------------------------------------------- grids

HyperGrid HyperGrid::standard(Family f) {
  HyperGrid g;
  g.family = f;
  switch (f) {
    case Family::lr:
      g.axes = {{"C", {0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0}}};
      break;
    case Family::mlp:
      g.axes = {{"hidden_layer_size", {10, 50, 100}},
                {"activation", {"relu", "tanh", "logistic"}},
                {"learning_rate_schedule", {"constant", "invscaling", "adaptive"}}};
      break;
    case Family::rf:
      g.axes = {{"n_estimators", {5, 50, 250}}, {"max_depth", {2, 4, 8, 16, 32, nullptr}}};
      break;
    case Family::gbt:
      g.axes = {{"n_estimators", {5, 50, 250, 500}},
                {"max_depth", {1, 3, 5, 7, 9}},
                {"learning_rate", {0.01, 0.1, 1.0, 10.0, 100.0}}};
      break;
  }
  return g;
}

HyperGrid HyperGrid::restricted(Family f, const json& subset) {
  HyperGrid g = standard(f);
  if (!subset.is_object()) throw Error("grid restriction must be a JSON object");
  for (const auto& [key, values] : subset.items()) {
    auto axis = std::find_if(g.axes.begin(), g.axes.end(), [&](const auto& a) { return a.first == key; });
    if (axis == g.axes.end())
      throw Error("'" + key + "' is not a hyperparameter of " + std::string(to_string(f)));
    const json list = values.is_array() ? values : json::array({values});
    if (list.empty()) throw Error("grid axis '" + key + "' would be empty");
    std::vector<json> kept;
    for (const auto& v : list) {
      if (std::find(axis->second.begin(), axis->second.end(), v) == axis->second.end())
        throw Error("value " + v.dump() + " for '" + key + "' is outside the search grid");
      if (std::find(kept.begin(), kept.end(), v) == kept.end()) kept.push_back(v);
    }
    // Keep the standard ordering so tie-breaks do not depend on how the subset was written.
    std::vector<json> ordered;
    for (const auto& v : axis->second)
      if (std::find(kept.begin(), kept.end(), v) != kept.end()) ordered.push_back(v);
    axis->second = std::move(ordered);
  }
  return g;
}

HyperGrid HyperGrid::single(Family f, const json& point) {
  HyperGrid g = restricted(f, point);
  for (const auto& [name, values] : g.axes)
    if (values.size() != 1) throw Error("single-point grid is missing a value for '" + name + "'");
  return g;
}

std::vector<json> HyperGrid::points() const {
  std::vector<json> out{json::object()};
  for (const auto& [name, values] : axes) {
    std::vector<json> next;
    for (const auto& partial : out)
      for (const auto& v : values) {
        json p = partial;
        p[name] = v;
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  return out;
}

bool HyperGrid::contains(const json& point) const {
  if (!point.is_object() || point.size() != axes.size()) return false;
  for (const auto& [name, values] : axes) {
    if (!point.contains(name)) return false;
    if (std::find(values.begin(), values.end(), point.at(name)) == values.end()) return false;
  }
  return true;
}

// ---------------------------------------------------------------- fitting

namespace {

int depth_param(const json& p) {
  const auto& v = p.at("max_depth");
  return v.is_null() ? ml::kUnboundedDepth : v.get<int>();
}

ml::MlpParams mlp_params(const json& p) {
  ml::MlpParams m;
  m.hidden = p.at("hidden_layer_size").get<int>();
  m.activation = ml::activation_from_string(p.at("activation").get<std::string>());
  m.schedule = ml::schedule_from_string(p.at("learning_rate_schedule").get<std::string>());
  return m;
}

bool needs_scaling(Family f) { return f == Family::lr || f == Family::mlp; }

TrainedModel::Fitted fit_raw(Family family, const Dataset& data, const json& p, std::uint64_t seed) {
  switch (family) {
    case Family::lr: return ml::LogisticModel::fit(data, p.at("C").get<double>());
    case Family::mlp: return ml::MlpModel::fit(data, mlp_params(p), seed);
    case Family::rf:
      return ml::ForestModel::fit(data, p.at("n_estimators").get<int>(), depth_param(p), seed);
    case Family::gbt:
      return ml::BoostedModel::fit(data, p.at("n_estimators").get<int>(), depth_param(p),
                                   p.at("learning_rate").get<double>());
  }
  throw Error("unreachable family");
}

double raw_proba(const TrainedModel::Fitted& fitted, std::span<const double> row) {
  return std::visit([&](const auto& m) { return m.predict_proba(row); }, fitted);
}

void check_trainable(const Dataset& data) {
  if (data.empty()) throw Error("cannot train on an empty dataset");
  if (data.cols() == 0) throw Error("cannot train without feature columns");
  const auto pos = data.positives();
  if (pos == 0 || pos == data.rows()) throw Error("training data must contain both classes");
}

double f1_of(const std::vector<int>& predicted, std::span<const int> actual) {
  return ml::compute_metrics(predicted, actual).f1;
}

struct Fold {
  Dataset train;
  Dataset valid;
};

std::vector<Fold> make_folds(Family family, const Dataset& data, std::size_t k, std::uint64_t seed) {
  const auto parts = ml::kfold_splits(data.rows(), k, data.labels, seed);
  std::vector<Fold> folds;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx;
    std::vector<char> in_fold(data.rows(), 0);
    for (std::size_t i : parts[f]) in_fold[i] = 1;
    for (std::size_t i = 0; i < data.rows(); ++i)
      if (!in_fold[i]) train_idx.push_back(i);
    Fold fold{data.subset(train_idx), data.subset(parts[f])};
    if (needs_scaling(family)) {
      const auto scaler = ml::Standardizer::fit(fold.train);
      fold.train = scaler.transform(fold.train);
      fold.valid = scaler.transform(fold.valid);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

// Mean validation F1 per grid point. Ensembles are fitted once per fold at
// the largest size in the grid and scored at each smaller size by prefix,
// which gives exactly the same predictions as separate fits.
std::vector<double> cross_validate(Family family, const std::vector<json>& points, const std::vector<Fold>& folds,
                                   std::uint64_t seed) {
  std::vector<double> score(points.size(), 0.0);
  const double k = static_cast<double>(folds.size());

  if (family == Family::lr || family == Family::mlp) {
    for (const auto& fold : folds)
      for (std::size_t p = 0; p < points.size(); ++p) {
        const auto fitted = fit_raw(family, fold.train, points[p], seed);
        std::vector<int> pred;
        for (std::size_t r = 0; r < fold.valid.rows(); ++r)
          pred.push_back(raw_proba(fitted, fold.valid.row(r)) >= ml::kDecisionThreshold);
        score[p] += f1_of(pred, fold.valid.labels) / k;
      }
    return score;
  }

  // Group points that differ only in n_estimators.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t p = 0; p < points.size(); ++p) {
    json key = points[p];
    key.erase("n_estimators");
    groups[key.dump()].push_back(p);
  }
  for (const auto& [key, members] : groups) {
    int largest = 0;
    for (std::size_t p : members) largest = std::max(largest, points[p].at("n_estimators").get<int>());
    json big = points[members.front()];
    big["n_estimators"] = largest;
    for (const auto& fold : folds) {
      const auto fitted = fit_raw(family, fold.train, big, seed);
      for (std::size_t p : members) {
        const auto n_trees = points[p].at("n_estimators").get<std::size_t>();
        std::vector<int> pred;
        for (std::size_t r = 0; r < fold.valid.rows(); ++r) {
          const double prob = std::visit(
              [&](const auto& m) -> double {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, ml::ForestModel> || std::is_same_v<M, ml::BoostedModel>) {
                  return m.predict_proba(fold.valid.row(r), n_trees);
                } else {
                  return m.predict_proba(fold.valid.row(r));
                }
              },
              fitted);
          pred.push_back(prob >= ml::kDecisionThreshold);
        }
        score[p] += f1_of(pred, fold.valid.labels) / k;
      }
    }
  }
  return score;
}

}  // namespace

TrainedModel fit_point(Family family, const Dataset& data, const json& params, std::uint64_t seed) {
  check_trainable(data);
  if (!HyperGrid::standard(family).contains(params))
    throw Error("hyperparameters " + params.dump() + " are not a point of the " + std::string(to_string(family)) +
                " grid");
  TrainedModel m;
  m.family = family;
  m.params = params;
  m.header = data.header;
  m.seed = seed;
  if (needs_scaling(family)) {
    m.standardizer = ml::Standardizer::fit(data);
    m.fitted = fit_raw(family, m.standardizer.transform(data), params, seed);
  } else {
    m.fitted = fit_raw(family, data, params, seed);
  }
  return m;
}

TrainedModel train(Family family, const Dataset& data, const HyperGrid& grid, std::uint64_t seed, std::size_t k) {
  check_trainable(data);
  if (grid.family != family) throw Error("grid belongs to a different model family");
  const auto points = grid.points();
  const auto standard = HyperGrid::standard(family);
  for (const auto& p : points)
    if (!standard.contains(p)) throw Error("grid point " + p.dump() + " is outside the search grid");

  const auto folds = make_folds(family, data, k, seed);
  const auto scores = cross_validate(family, points, folds, seed);

  std::size_t best = 0;
  for (std::size_t p = 1; p < points.size(); ++p)
    if (scores[p] > scores[best]) best = p;

  TrainedModel m = fit_point(family, data, points[best], seed);
  for (std::size_t p = 0; p < points.size(); ++p) m.cv.push_back({points[p], scores[p]});
  return m;
}

// ---------------------------------------------------------------- applying

double TrainedModel::predict_proba(std::span<const double> row) const {
  if (row.size() != header.size())
    throw Error("row has " + std::to_string(row.size()) + " values, model expects " + std::to_string(header.size()));
  if (standardizer.empty()) return raw_proba(fitted, row);
  std::vector<double> scaled(row.begin(), row.end());
  standardizer.apply(scaled);
  return raw_proba(fitted, scaled);
}

EvalMetrics evaluate(const TrainedModel& model, const Dataset& data) {
  if (data.empty()) throw Error("cannot evaluate on an empty dataset");
  if (data.header != model.header) throw Error("dataset columns do not match the model header");
  std::vector<int> pred;
  pred.reserve(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) pred.push_back(model.predict(data.row(r)));
  return ml::compute_metrics(pred, data.labels);
}

std::vector<std::pair<std::string, double>> rank_weights(const std::vector<std::string>& names,
                                                         const std::vector<double>& weights) {
  if (names.size() != weights.size()) throw Error("weight count does not match feature count");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.emplace_back(names[i], weights[i]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::vector<std::pair<std::string, double>> feature_importance(const TrainedModel& model) {
  const std::size_t d = model.header.size();
  std::vector<double> w;
  switch (model.family) {
    case Family::mlp:
      throw UnsupportedFamily("feature importance is only available for lr, rf and gbt models");
    case Family::lr:
      for (double c : std::get<ml::LogisticModel>(model.fitted).coef) w.push_back(std::abs(c));
      break;
    case Family::rf: w = std::get<ml::ForestModel>(model.fitted).importance(d); break;
    case Family::gbt: w = std::get<ml::BoostedModel>(model.fitted).importance(d); break;
  }
  return rank_weights(model.header, w);
}

// ---------------------------------------------------------------- artifacts

namespace {
constexpr int kArtifactVersion = 1;
constexpr const char* kArtifactFormat = "fedwatch-model";
}  // namespace

std::string TrainedModel::serialize() const {
  json j;
  j["format"] = kArtifactFormat;
  j["version"] = kArtifactVersion;
  j["family"] = to_string(family);
  j["params"] = params;
  j["header"] = header;
  j["seed"] = seed;
  if (!standardizer.empty()) j["standardizer"] = standardizer;
  j["model"] = std::visit([](const auto& m) { return json(m); }, fitted);
  auto cv_json = json::array();
  for (const auto& c : cv) cv_json.push_back({{"params", c.params}, {"mean_f1", c.mean_f1}});
  j["cv"] = cv_json;
  j["metadata"] = metadata;
  return j.dump();
}

TrainedModel TrainedModel::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("model artifact is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != kArtifactFormat) throw Error("not a model artifact");
  if (j.value("version", 0) != kArtifactVersion) throw Error("unsupported model artifact version");
  try {
    TrainedModel m;
    m.family = family_from_string(j.at("family").get<std::string>());
    m.params = j.at("params");
    m.header = j.at("header").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("standardizer")) m.standardizer = j.at("standardizer").get<ml::Standardizer>();
    const auto& body = j.at("model");
    switch (m.family) {
      case Family::lr: m.fitted = body.get<ml::LogisticModel>(); break;
      case Family::mlp: m.fitted = body.get<ml::MlpModel>(); break;
      case Family::rf: m.fitted = body.get<ml::ForestModel>(); break;
      case Family::gbt: m.fitted = body.get<ml::BoostedModel>(); break;
    }
    for (const auto& c : j.at("cv")) m.cv.push_back({c.at("params"), c.at("mean_f1").get<double>()});
    m.metadata = j.value("metadata", json::object());
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model artifact: ") + e.what());
  }
}

void TrainedModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model to " + path.string());
  out << serialize() << '\n';
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read model from " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace fedwatch
