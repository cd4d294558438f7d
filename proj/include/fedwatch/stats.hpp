#pragma once

#include <span>
#include <vector>

#include "fedwatch/types.hpp"

namespace fedwatch {

/// Raised when a statistic is not identifiable from the input (constant
/// vectors, zero rank variance).
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Requires |x| == |y| >= 2; throws
/// UndefinedStatistic when either rank vector has zero variance.
double spearman(std::span<const double> x, std::span<const double> y);

/// Right-continuous F(x) = #{v <= x} / n.
class EmpiricalCdf {
 public:
  /// Throws Error on empty input or NaN values.
  explicit EmpiricalCdf(std::vector<double> values);

  double operator()(double x) const;
  const std::vector<double>& sorted_values() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

/// (x^lambda - 1) / lambda, ln(x) at lambda == 0. Throws Error for x <= 0.
double box_cox(double x, double lambda);

/// Profile log-likelihood of the Box-Cox transformed sample (normal model,
/// variance at its MLE). Requires all values > 0.
double box_cox_log_likelihood(std::span<const double> values, double lambda);

inline constexpr double kBoxCoxLambdaMin = -5.0;
inline constexpr double kBoxCoxLambdaMax = 5.0;

/// Maximum-likelihood lambda over [-5, 5]. Throws Error on non-positive
/// values and UndefinedStatistic on constant input.
double fit_box_cox(std::span<const double> values);

}  // namespace fedwatch
