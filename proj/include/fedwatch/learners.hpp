#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fedwatch/ml/dataset.hpp"
#include "fedwatch/ml/models.hpp"

namespace fedwatch {

using ml::Dataset;
using ml::EvalMetrics;

enum class Family { lr, mlp, rf, gbt };

inline constexpr Family kAllFamilies[] = {Family::lr, Family::mlp, Family::rf, Family::gbt};

std::string_view to_string(Family f);
/// Accepts lr, mlp, rf, gbt. Throws Error otherwise.
Family family_from_string(std::string_view s);
bool explainable(Family f);

class UnsupportedFamily : public Error {
 public:
  using Error::Error;
};

/// Cartesian hyperparameter grid. Points are enumerated with the first axis
/// outermost, which is also the tie-breaking order of model selection.
/// A null value for max_depth means unbounded.
struct HyperGrid {
  Family family = Family::lr;
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;

  /// The full search grid for a family.
  static HyperGrid standard(Family f);
  /// Standard grid with some axes narrowed, e.g. {"max_depth": [4, 8]}.
  /// Every listed value must belong to the standard axis.
  static HyperGrid restricted(Family f, const nlohmann::json& subset);
  /// A grid holding exactly one point (values must belong to the standard grid).
  static HyperGrid single(Family f, const nlohmann::json& point);

  std::vector<nlohmann::json> points() const;
  bool contains(const nlohmann::json& point) const;
};

struct CvResult {
  nlohmann::json params;
  double mean_f1 = 0.0;
};

/// A fitted model plus everything needed to apply it to new rows.
class TrainedModel {
 public:
  using Fitted = std::variant<ml::LogisticModel, ml::MlpModel, ml::ForestModel, ml::BoostedModel>;

  Family family = Family::lr;
  nlohmann::json params;
  std::vector<std::string> header;
  std::uint64_t seed = 0;
  ml::Standardizer standardizer;  // empty for tree families
  Fitted fitted;
  std::vector<CvResult> cv;       // one entry per grid point, in grid order
  nlohmann::json metadata = nlohmann::json::object();

  /// Throws Error when the row width does not match the header.
  double predict_proba(std::span<const double> row) const;
  int predict(std::span<const double> row) const { return predict_proba(row) >= ml::kDecisionThreshold; }

  std::string serialize() const;
  static TrainedModel deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);
};

/// Fits one grid point on the whole dataset.
TrainedModel fit_point(Family family, const Dataset& data, const nlohmann::json& params, std::uint64_t seed);

/// 5-fold stratified grid search on mean F1, then a refit of the best point
/// on all rows. Throws Error on a single-class dataset or when a class has
/// fewer members than folds.
TrainedModel train(Family family, const Dataset& data, const HyperGrid& grid, std::uint64_t seed,
                   std::size_t folds = 5);

/// Confusion-matrix metrics at threshold 0.5. Throws Error when the dataset
/// is empty or its header differs from the model's.
EvalMetrics evaluate(const TrainedModel& model, const Dataset& data);

/// Features ranked by weight, descending with ties broken by name.
/// Linear models report |coefficient| on standardized inputs; tree ensembles
/// report impurity-decrease shares summing to 1. Throws UnsupportedFamily for MLP.
std::vector<std::pair<std::string, double>> feature_importance(const TrainedModel& model);

/// Same ranking for a bare weight vector.
std::vector<std::pair<std::string, double>> rank_weights(const std::vector<std::string>& names,
                                                         const std::vector<double>& weights);

}  // namespace fedwatch
