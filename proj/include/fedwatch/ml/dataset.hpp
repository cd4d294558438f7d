#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedwatch/types.hpp"

namespace fedwatch::ml {

/// Dense row-major design matrix with binary labels and row provenance.
struct Dataset {
  std::vector<std::string> header;
  std::vector<double> values;  // rows() * cols()
  std::vector<int> labels;     // 0 / 1
  std::vector<InstanceRef> instances;
  std::vector<Timestamp> timestamps;

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return header.size(); }
  bool empty() const { return labels.empty(); }

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols(), cols()}; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  /// Non-finite values are imputed as 0.
  void add_row(std::span<const double> features, int label, InstanceRef instance = {}, Timestamp ts = 0);

  Dataset subset(std::span<const std::size_t> indices) const;
  /// Throws Error when a named column is absent.
  Dataset drop_columns(const std::vector<std::string>& names) const;
  std::size_t column_index(const std::string& name) const;

  std::size_t positives() const;

  /// CSV with header row; label is the last column, named "label".
  std::string to_csv() const;
  static Dataset from_csv(const std::string& text);
};

/// Column means/standard deviations from a training split; zero-variance
/// columns are left unscaled.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& d);
  void apply(std::span<double> row) const;
  Dataset transform(const Dataset& d) const;
  bool empty() const { return mean.empty(); }
};

void to_json(nlohmann::json& j, const Standardizer& s);
void from_json(const nlohmann::json& j, Standardizer& s);

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct EvalMetrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Confusion confusion;
};

void to_json(nlohmann::json& j, const EvalMetrics& m);

inline constexpr double kDecisionThreshold = 0.5;

/// Metrics of hard predictions (0/1). Precision, recall and F1 are 0 when
/// their denominators are 0. Throws Error on empty or mismatched input.
EvalMetrics compute_metrics(std::span<const int> predicted, std::span<const int> actual);

/// Stratified k-fold partition of [0, n). Fold sizes differ by at most one
/// and each fold's class counts are within one sample of the global ratio.
/// Throws Error when n < k or a class has fewer than k members.
std::vector<std::vector<std::size_t>> kfold_splits(std::size_t n, std::size_t k, std::span<const int> labels,
                                                   std::uint64_t seed);

/// Stratified single split: `train_fraction` of each class goes to the first part.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                                               double train_fraction,
                                                                               std::uint64_t seed);

/// SplitMix64 step; used to derive independent seeds from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace fedwatch::ml
