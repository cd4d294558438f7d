#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "fedwatch/ml/dataset.hpp"

namespace fedwatch::ml {

/// CART node. Leaves have feature == -1. Samples with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output: positive fraction (classification) or Newton step (regression)
};

class DecisionTree {
 public:
  double predict(std::span<const double> row) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<TreeNode>& nodes() { return nodes_; }
  /// Weighted impurity decrease attributed to each feature.
  const std::vector<double>& importance() const { return importance_; }
  std::vector<double>& importance() { return importance_; }
  int depth() const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<double> importance_;
};

void to_json(nlohmann::json& j, const DecisionTree& t);
void from_json(const nlohmann::json& j, DecisionTree& t);

inline constexpr int kUnboundedDepth = -1;

struct TreeParams {
  int max_depth = kUnboundedDepth;
  int max_features = 0;  // 0 = consider every feature at each node
};

/// Per-feature row orders, sorted by value. Computed once per training
/// matrix and shared by every tree fitted on it.
class SortedColumns {
 public:
  explicit SortedColumns(const Dataset& data);

  const Dataset& data() const { return *data_; }
  std::span<const std::uint32_t> order(std::size_t feature) const {
    return {orders_.data() + feature * rows_, rows_};
  }

 private:
  const Dataset* data_;
  std::size_t rows_;
  std::vector<std::uint32_t> orders_;
};

/// Gini classification tree on integer sample weights (bootstrap counts;
/// rows with weight 0 are out of bag). Leaves hold the weighted positive fraction.
DecisionTree fit_gini_tree(const SortedColumns& cols, std::span<const std::uint32_t> weights, const TreeParams& params,
                           std::mt19937_64& rng);

/// Least-squares regression tree on gradients, split by variance reduction.
/// Leaves hold sum(gradient) / sum(hessian), or 0 when the hessian sum vanishes.
DecisionTree fit_gradient_tree(const SortedColumns& cols, std::span<const double> gradient,
                               std::span<const double> hessian, const TreeParams& params);

}  // namespace fedwatch::ml
