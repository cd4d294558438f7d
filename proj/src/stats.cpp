#include "fedwatch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/minima.hpp>

namespace fedwatch {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("spearman: vectors differ in length");
  if (x.size() < 2) throw Error("spearman: need at least two observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedStatistic("spearman: zero rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw Error("empirical_cdf: no values");
  if (std::any_of(sorted_.begin(), sorted_.end(), [](double v) { return std::isnan(v); })) {
    throw Error("empirical_cdf: NaN value");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
  const auto le = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(le) / static_cast<double>(sorted_.size());
}

double box_cox(double x, double lambda) {
  if (!(x > 0.0)) throw Error("box_cox: value must be positive");
  const double lx = std::log(x);
  if (lambda == 0.0) return lx;
  // expm1 only where pow would cancel; pow keeps lambda = 1 exactly x - 1.
  if (std::abs(lambda) < 1e-4) return std::expm1(lambda * lx) / lambda;
  return (std::pow(x, lambda) - 1.0) / lambda;
}

double box_cox_log_likelihood(std::span<const double> values, double lambda) {
  const double n = static_cast<double>(values.size());
  double sum_log = 0;
  double mean = 0;
  std::vector<double> t(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum_log += std::log(values[i]);
    t[i] = box_cox(values[i], lambda);
    mean += t[i];
  }
  mean /= n;
  double var = 0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= n;
  if (!std::isfinite(var) || var <= 0.0) return -std::numeric_limits<double>::infinity();
  return (lambda - 1.0) * sum_log - n / 2.0 * std::log(var);
}

double fit_box_cox(std::span<const double> values) {
  if (values.empty()) throw Error("fit_box_cox: no values");
  if (std::any_of(values.begin(), values.end(), [](double v) { return !(v > 0.0); })) {
    throw Error("fit_box_cox: values must be positive");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) throw UndefinedStatistic("fit_box_cox: constant input");

  // Coarse scan picks the bracket, Brent refines inside it.
  constexpr int kGrid = 100;
  const double step = (kBoxCoxLambdaMax - kBoxCoxLambdaMin) / kGrid;
  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double ll = box_cox_log_likelihood(values, kBoxCoxLambdaMin + i * step);
    if (ll > best_ll) {
      best_ll = ll;
      best = i;
    }
  }
  const double a = kBoxCoxLambdaMin + std::max(0, best - 1) * step;
  const double b = kBoxCoxLambdaMin + std::min(kGrid, best + 1) * step;
  auto neg_ll = [&](double lambda) { return -box_cox_log_likelihood(values, lambda); };
  const auto [lambda, neg] = boost::math::tools::brent_find_minima(neg_ll, a, b, 40);
  return -neg >= best_ll ? lambda : kBoxCoxLambdaMin + best * step;
}

}  // namespace fedwatch
