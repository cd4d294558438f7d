#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedwatch/ml/dataset.hpp"
#include "fedwatch/ml/tree.hpp"

namespace fedwatch::ml {

double sigmoid(double z);

/// L2-regularized logistic regression, 0.5*|w|^2 + C * sum(logloss), with an
/// unpenalized intercept. Fitted by damped Newton steps.
struct LogisticModel {
  std::vector<double> coef;
  double intercept = 0.0;

  static LogisticModel fit(const Dataset& data, double C);
  double decision(std::span<const double> row) const;
  double predict_proba(std::span<const double> row) const { return sigmoid(decision(row)); }
};

enum class Activation { relu, tanh, logistic };
enum class LearningSchedule { constant, invscaling, adaptive };

std::string_view to_string(Activation a);
std::string_view to_string(LearningSchedule s);
Activation activation_from_string(std::string_view s);
LearningSchedule schedule_from_string(std::string_view s);

struct MlpParams {
  int hidden = 100;
  Activation activation = Activation::relu;
  LearningSchedule schedule = LearningSchedule::constant;
  int epochs = 200;
  std::size_t batch_size = 200;
  double learning_rate_init = 0.01;
  double power_t = 0.5;
  double momentum = 0.9;
  double alpha = 1e-4;
  double tol = 1e-4;
};

/// One hidden layer, sigmoid output, log loss; mini-batch SGD with
/// Nesterov momentum for a fixed number of epochs.
struct MlpModel {
  Activation activation = Activation::relu;
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x inputs, row-major
  std::vector<double> b1;
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  static MlpModel fit(const Dataset& data, const MlpParams& params, std::uint64_t seed);
  double predict_proba(std::span<const double> row) const;
};

/// Bagged Gini trees with sqrt(d) features per split. The probability is the
/// fraction of trees voting positive. Tree t depends only on (seed, t), so a
/// forest of k trees is a prefix of any larger forest with the same seed.
struct ForestModel {
  std::vector<DecisionTree> trees;

  static ForestModel fit(const Dataset& data, int n_estimators, int max_depth, std::uint64_t seed);
  double predict_proba(std::span<const double> row) const { return predict_proba(row, trees.size()); }
  double predict_proba(std::span<const double> row, std::size_t n_trees) const;
  /// Mean of per-tree normalized impurity decreases, renormalized to sum 1.
  std::vector<double> importance(std::size_t n_features) const;
};

/// Gradient boosting on logistic loss with Newton-step leaves. The additive
/// score is clamped to +-kScoreLimit after every stage.
struct BoostedModel {
  static constexpr double kScoreLimit = 1000.0;

  double init = 0.0;
  double learning_rate = 0.1;
  std::vector<DecisionTree> trees;

  static BoostedModel fit(const Dataset& data, int n_estimators, int max_depth, double learning_rate);
  double score(std::span<const double> row, std::size_t n_trees) const;
  double predict_proba(std::span<const double> row) const { return sigmoid(score(row, trees.size())); }
  double predict_proba(std::span<const double> row, std::size_t n_trees) const {
    return sigmoid(score(row, n_trees));
  }
  std::vector<double> importance(std::size_t n_features) const;
};

void to_json(nlohmann::json& j, const LogisticModel& m);
void from_json(const nlohmann::json& j, LogisticModel& m);
void to_json(nlohmann::json& j, const MlpModel& m);
void from_json(const nlohmann::json& j, MlpModel& m);
void to_json(nlohmann::json& j, const ForestModel& m);
void from_json(const nlohmann::json& j, ForestModel& m);
void to_json(nlohmann::json& j, const BoostedModel& m);
void from_json(const nlohmann::json& j, BoostedModel& m);

}  // namespace fedwatch::ml
