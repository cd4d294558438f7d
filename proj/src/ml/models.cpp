#include "fedwatch/ml/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace fedwatch::ml {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_matrix(const Dataset& d) {
  return {d.values.data(), static_cast<Eigen::Index>(d.rows()), static_cast<Eigen::Index>(d.cols())};
}

Eigen::VectorXd label_vector(const Dataset& d) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.rows()));
  for (std::size_t i = 0; i < d.rows(); ++i) y(static_cast<Eigen::Index>(i)) = d.labels[i];
  return y;
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void require_width(std::span<const double> row, std::size_t width) {
  if (row.size() != width) throw Error("row has " + std::to_string(row.size()) + " values, model expects " +
                                       std::to_string(width));
}

std::vector<double> normalized(std::vector<double> v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(total > 0)) {
    // No split anywhere: nothing distinguishes the features.
    std::fill(v.begin(), v.end(), v.empty() ? 0.0 : 1.0 / static_cast<double>(v.size()));
    return v;
  }
  for (double& x : v) x /= total;
  return v;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------- logistic

LogisticModel LogisticModel::fit(const Dataset& data, double C) {
  if (!(C > 0)) throw Error("logistic regression: C must be positive");
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto d = static_cast<Eigen::Index>(data.cols());
  Eigen::MatrixXd X(n, d + 1);
  X.leftCols(d) = as_matrix(data);
  X.col(d).setOnes();
  const Eigen::VectorXd y = label_vector(data);
  Eigen::VectorXd penalty = Eigen::VectorXd::Ones(d + 1);
  penalty(d) = 0.0;

  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd z = X * beta;
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) loss += softplus(z(i)) - y(i) * z(i);
    return 0.5 * beta.cwiseProduct(penalty).dot(beta) + C * loss;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  double f = objective(beta);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd z = X * beta;
    Eigen::VectorXd p(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(z(i));
      s(i) = p(i) * (1 - p(i));
    }
    const Eigen::VectorXd grad = beta.cwiseProduct(penalty) + C * X.transpose() * (p - y);
    Eigen::MatrixXd H = C * X.transpose() * s.asDiagonal() * X;
    H.diagonal() += penalty + Eigen::VectorXd::Constant(d + 1, 1e-10);
    const Eigen::VectorXd step = H.ldlt().solve(grad);

    double t = 1.0;
    Eigen::VectorXd next = beta - step;
    double f_next = objective(next);
    for (int halving = 0; halving < 50 && !(f_next <= f); ++halving) {
      t *= 0.5;
      next = beta - t * step;
      f_next = objective(next);
    }
    if (!(f_next <= f)) break;
    const double moved = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    f = f_next;
    if (moved <= 1e-10 * (1.0 + beta.lpNorm<Eigen::Infinity>())) break;
  }

  LogisticModel m;
  m.coef.assign(beta.data(), beta.data() + d);
  m.intercept = beta(d);
  return m;
}

double LogisticModel::decision(std::span<const double> row) const {
  require_width(row, coef.size());
  double z = intercept;
  for (std::size_t j = 0; j < coef.size(); ++j) z += coef[j] * row[j];
  return z;
}

// ---------------------------------------------------------------- MLP

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::logistic: return "logistic";
  }
  return "relu";
}

std::string_view to_string(LearningSchedule s) {
  switch (s) {
    case LearningSchedule::constant: return "constant";
    case LearningSchedule::invscaling: return "invscaling";
    case LearningSchedule::adaptive: return "adaptive";
  }
  return "constant";
}

Activation activation_from_string(std::string_view s) {
  for (auto a : {Activation::relu, Activation::tanh, Activation::logistic})
    if (to_string(a) == s) return a;
  throw Error("unknown activation '" + std::string(s) + "'");
}

LearningSchedule schedule_from_string(std::string_view s) {
  for (auto v : {LearningSchedule::constant, LearningSchedule::invscaling, LearningSchedule::adaptive})
    if (to_string(v) == s) return v;
  throw Error("unknown learning-rate schedule '" + std::string(s) + "'");
}

namespace {

void activate(Activation a, Eigen::MatrixXd& m) {
  switch (a) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::tanh: m = m.array().tanh(); break;
    case Activation::logistic: m = m.unaryExpr([](double v) { return sigmoid(v); }); break;
  }
}

// Derivative expressed through the pre-activation `a` and output `h`.
Eigen::MatrixXd activation_slope(Activation act, const Eigen::MatrixXd& a, const Eigen::MatrixXd& h) {
  switch (act) {
    case Activation::relu: return (a.array() > 0.0).cast<double>();
    case Activation::tanh: return 1.0 - h.array().square();
    case Activation::logistic: return h.array() * (1.0 - h.array());
  }
  return {};
}

}  // namespace

MlpModel MlpModel::fit(const Dataset& data, const MlpParams& p, std::uint64_t seed) {
  if (p.hidden < 1 || p.epochs < 1 || p.batch_size < 1) throw Error("MLP: invalid parameters");
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto d = static_cast<Eigen::Index>(data.cols());
  const auto h = static_cast<Eigen::Index>(p.hidden);
  const Eigen::Map<const RowMatrix> X = as_matrix(data);
  const Eigen::VectorXd y = label_vector(data);

  std::mt19937_64 rng(seed);
  const double factor = p.activation == Activation::logistic ? 2.0 : 6.0;
  auto glorot = [&](Eigen::MatrixXd& w, Eigen::Index fan_in, Eigen::Index fan_out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double bound = std::sqrt(factor / static_cast<double>(fan_in + fan_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = bound * u(rng);
  };
  Eigen::MatrixXd W1(d, h), B1(1, h), W2(h, 1), B2(1, 1);
  glorot(W1, d, h);
  glorot(B1, d, h);
  glorot(W2, h, 1);
  glorot(B2, h, 1);
  Eigen::MatrixXd vW1 = Eigen::MatrixXd::Zero(d, h), vB1 = Eigen::MatrixXd::Zero(1, h);
  Eigen::MatrixXd vW2 = Eigen::MatrixXd::Zero(h, 1), vB2 = Eigen::MatrixXd::Zero(1, 1);

  const auto batch = std::min<Eigen::Index>(static_cast<Eigen::Index>(p.batch_size), n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double lr = p.learning_rate_init;
  double best_loss = std::numeric_limits<double>::infinity();
  int stalled = 0;
  Eigen::MatrixXd Xb, A, Hb;
  Eigen::VectorXd yb;

  auto nesterov = [&](Eigen::MatrixXd& param, Eigen::MatrixXd& vel, const Eigen::MatrixXd& grad) {
    vel = p.momentum * vel - lr * grad;
    param += p.momentum * vel - lr * grad;
  };

  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    if (p.schedule == LearningSchedule::invscaling)
      lr = p.learning_rate_init / std::pow(static_cast<double>(epoch + 1), p.power_t);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index b = std::min(batch, n - start);
      Xb.resize(b, d);
      yb.resize(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        Xb.row(i) = X.row(order[static_cast<std::size_t>(start + i)]);
        yb(i) = y(order[static_cast<std::size_t>(start + i)]);
      }
      A = (Xb * W1).rowwise() + B1.row(0);
      Hb = A;
      activate(p.activation, Hb);
      const Eigen::VectorXd z = (Hb * W2).array() + B2(0, 0);
      Eigen::VectorXd dz(b);
      double loss = 0;
      for (Eigen::Index i = 0; i < b; ++i) {
        loss += softplus(z(i)) - yb(i) * z(i);
        dz(i) = (sigmoid(z(i)) - yb(i)) / static_cast<double>(b);
      }
      const double reg = p.alpha / static_cast<double>(b);
      loss = loss / static_cast<double>(b) + 0.5 * reg * (W1.squaredNorm() + W2.squaredNorm());
      epoch_loss += loss * static_cast<double>(b);

      const Eigen::MatrixXd gW2 = Hb.transpose() * dz + reg * W2;
      Eigen::MatrixXd gB2(1, 1);
      gB2(0, 0) = dz.sum();
      const Eigen::MatrixXd dH = (dz * W2.transpose()).cwiseProduct(activation_slope(p.activation, A, Hb));
      const Eigen::MatrixXd gW1 = Xb.transpose() * dH + reg * W1;
      const Eigen::MatrixXd gB1 = dH.colwise().sum();
      nesterov(W1, vW1, gW1);
      nesterov(B1, vB1, gB1);
      nesterov(W2, vW2, gW2);
      nesterov(B2, vB2, gB2);
    }
    epoch_loss /= static_cast<double>(n);
    if (p.schedule == LearningSchedule::adaptive) {
      stalled = epoch_loss > best_loss - p.tol ? stalled + 1 : 0;
      if (stalled >= 2) {
        if (lr > 1e-6) lr /= 5.0;
        stalled = 0;
      }
    }
    best_loss = std::min(best_loss, epoch_loss);
  }

  MlpModel m;
  m.activation = p.activation;
  m.inputs = static_cast<std::size_t>(d);
  m.hidden = static_cast<std::size_t>(h);
  const RowMatrix w1 = W1.transpose();  // hidden x inputs
  m.w1.assign(w1.data(), w1.data() + w1.size());
  m.b1.assign(B1.data(), B1.data() + B1.size());
  m.w2.assign(W2.data(), W2.data() + W2.size());
  m.b2 = B2(0, 0);
  return m;
}

double MlpModel::predict_proba(std::span<const double> row) const {
  require_width(row, inputs);
  double z = b2;
  for (std::size_t k = 0; k < hidden; ++k) {
    double a = b1[k];
    for (std::size_t j = 0; j < inputs; ++j) a += w1[k * inputs + j] * row[j];
    switch (activation) {
      case Activation::relu: a = std::max(a, 0.0); break;
      case Activation::tanh: a = std::tanh(a); break;
      case Activation::logistic: a = sigmoid(a); break;
    }
    z += w2[k] * a;
  }
  return sigmoid(z);
}

// ---------------------------------------------------------------- forest

ForestModel ForestModel::fit(const Dataset& data, int n_estimators, int max_depth, std::uint64_t seed) {
  if (n_estimators < 1) throw Error("random forest: n_estimators must be positive");
  if (data.empty()) throw Error("random forest: empty training set");
  const SortedColumns cols(data);
  const int max_features =
      std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(data.cols())))));
  const TreeParams params{max_depth, max_features};
  ForestModel m;
  std::vector<std::uint32_t> weights(data.rows());
  for (int t = 0; t < n_estimators; ++t) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::fill(weights.begin(), weights.end(), 0u);
    std::uniform_int_distribution<std::size_t> draw(0, data.rows() - 1);
    for (std::size_t i = 0; i < data.rows(); ++i) ++weights[draw(rng)];
    m.trees.push_back(fit_gini_tree(cols, weights, params, rng));
  }
  return m;
}

double ForestModel::predict_proba(std::span<const double> row, std::size_t n_trees) const {
  n_trees = std::min(n_trees, trees.size());
  if (n_trees == 0) throw Error("random forest has no trees");
  std::size_t votes = 0;
  for (std::size_t t = 0; t < n_trees; ++t) votes += trees[t].predict(row) >= kDecisionThreshold;
  return static_cast<double>(votes) / static_cast<double>(n_trees);
}

std::vector<double> ForestModel::importance(std::size_t n_features) const {
  std::vector<double> total(n_features, 0.0);
  for (const auto& tree : trees) {
    const double sum = std::accumulate(tree.importance().begin(), tree.importance().end(), 0.0);
    if (!(sum > 0)) continue;
    for (std::size_t f = 0; f < n_features && f < tree.importance().size(); ++f)
      total[f] += tree.importance()[f] / sum;
  }
  return normalized(std::move(total));
}

// ---------------------------------------------------------------- boosting

namespace {
double clamp_score(double f) { return std::clamp(f, -BoostedModel::kScoreLimit, BoostedModel::kScoreLimit); }
}  // namespace

BoostedModel BoostedModel::fit(const Dataset& data, int n_estimators, int max_depth, double learning_rate) {
  if (n_estimators < 1) throw Error("gradient boosting: n_estimators must be positive");
  if (data.empty()) throw Error("gradient boosting: empty training set");
  const std::size_t n = data.rows();
  const double prior = static_cast<double>(data.positives()) / static_cast<double>(n);
  BoostedModel m;
  m.learning_rate = learning_rate;
  m.init = prior <= 0 ? -kScoreLimit : prior >= 1 ? kScoreLimit : clamp_score(std::log(prior / (1 - prior)));

  const SortedColumns cols(data);
  const TreeParams params{max_depth, 0};
  std::vector<double> F(n, m.init), g(n), h(n);
  for (int t = 0; t < n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(F[i]);
      g[i] = data.labels[i] - p;
      h[i] = p * (1 - p);
    }
    m.trees.push_back(fit_gradient_tree(cols, g, h, params));
    const auto& tree = m.trees.back();
    for (std::size_t i = 0; i < n; ++i) F[i] = clamp_score(F[i] + learning_rate * tree.predict(data.row(i)));
  }
  return m;
}

double BoostedModel::score(std::span<const double> row, std::size_t n_trees) const {
  n_trees = std::min(n_trees, trees.size());
  double f = init;
  for (std::size_t t = 0; t < n_trees; ++t) f = clamp_score(f + learning_rate * trees[t].predict(row));
  return f;
}

std::vector<double> BoostedModel::importance(std::size_t n_features) const {
  std::vector<double> total(n_features, 0.0);
  for (const auto& tree : trees)
    for (std::size_t f = 0; f < n_features && f < tree.importance().size(); ++f) total[f] += tree.importance()[f];
  return normalized(std::move(total));
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const LogisticModel& m) { j = {{"coef", m.coef}, {"intercept", m.intercept}}; }
void from_json(const nlohmann::json& j, LogisticModel& m) {
  m.coef = j.at("coef").get<std::vector<double>>();
  m.intercept = j.at("intercept").get<double>();
}

void to_json(nlohmann::json& j, const MlpModel& m) {
  j = {{"activation", to_string(m.activation)},
       {"inputs", m.inputs},
       {"hidden", m.hidden},
       {"w1", m.w1},
       {"b1", m.b1},
       {"w2", m.w2},
       {"b2", m.b2}};
}
void from_json(const nlohmann::json& j, MlpModel& m) {
  m.activation = activation_from_string(j.at("activation").get<std::string>());
  m.inputs = j.at("inputs").get<std::size_t>();
  m.hidden = j.at("hidden").get<std::size_t>();
  m.w1 = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  m.w2 = j.at("w2").get<std::vector<double>>();
  m.b2 = j.at("b2").get<double>();
  if (m.w1.size() != m.inputs * m.hidden || m.b1.size() != m.hidden || m.w2.size() != m.hidden)
    throw Error("MLP artifact has inconsistent weight shapes");
}

void to_json(nlohmann::json& j, const ForestModel& m) { j = {{"trees", m.trees}}; }
void from_json(const nlohmann::json& j, ForestModel& m) { m.trees = j.at("trees").get<std::vector<DecisionTree>>(); }

void to_json(nlohmann::json& j, const BoostedModel& m) {
  j = {{"init", m.init}, {"learning_rate", m.learning_rate}, {"trees", m.trees}};
}
void from_json(const nlohmann::json& j, BoostedModel& m) {
  m.init = j.at("init").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.trees = j.at("trees").get<std::vector<DecisionTree>>();
}

}  // namespace fedwatch::ml
