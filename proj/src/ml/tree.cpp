#include "fedwatch/ml/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedwatch::ml {

double DecisionTree::predict(std::span<const double> row) const {
  if (nodes_.empty()) return 0.0;
  int i = 0;
  while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(i)].value;
}

int DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {  // children are appended after parents
    const auto& n = nodes_[i];
    if (n.feature < 0) continue;
    d[static_cast<std::size_t>(n.left)] = d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

void to_json(nlohmann::json& j, const DecisionTree& t) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : t.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  j = {{"nodes", nodes}, {"importance", t.importance()}};
}

void from_json(const nlohmann::json& j, DecisionTree& t) {
  t.nodes().clear();
  for (const auto& n : j.at("nodes")) {
    t.nodes().push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                         n.at(4).get<double>()});
  }
  t.importance() = j.at("importance").get<std::vector<double>>();
}

SortedColumns::SortedColumns(const Dataset& data) : data_(&data), rows_(data.rows()) {
  const std::size_t d = data.cols();
  orders_.resize(d * rows_);
  std::vector<std::uint32_t> idx(rows_);
  for (std::size_t f = 0; f < d; ++f) {
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return data.at(a, f) < data.at(b, f); });
    std::copy(idx.begin(), idx.end(), orders_.begin() + static_cast<std::ptrdiff_t>(f * rows_));
  }
}

namespace {

// Sufficient statistics of a node for each criterion.
struct GiniStats {
  double w = 0, pos = 0;
  void add(double weight, double label) {
    w += weight;
    pos += weight * label;
  }
  // Sum over classes of count^2 / total: larger is purer.
  double purity() const { return w > 0 ? (pos * pos + (w - pos) * (w - pos)) / w : 0.0; }
  // Weighted Gini impurity, N * (1 - sum p^2).
  double impurity() const { return w - purity(); }
  GiniStats minus(const GiniStats& o) const { return {w - o.w, pos - o.pos}; }
};

struct GradStats {
  double n = 0, g = 0, h = 0;
  void add(double grad, double hess) {
    n += 1;
    g += grad;
    h += hess;
  }
  double purity() const { return n > 0 ? g * g / n : 0.0; }
  GradStats minus(const GradStats& o) const { return {n - o.n, g - o.g, h - o.h}; }
};

// Column-major copy so split scans read contiguous memory per feature.
struct ColumnValues {
  std::size_t rows;
  std::vector<double> v;
  explicit ColumnValues(const Dataset& d) : rows(d.rows()), v(d.rows() * d.cols()) {
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.cols(); ++c) v[c * rows + r] = d.at(r, c);
  }
  double operator()(std::uint32_t sample, std::size_t feature) const { return v[feature * rows + sample]; }
};

struct Split {
  int feature = -1;
  double threshold = 0;
  double score = 0;
};

// Shared depth-first builder; `Policy` supplies per-sample statistics and leaf values.
template <typename Policy>
class Builder {
 public:
  using Stats = typename Policy::Stats;

  Builder(const SortedColumns& cols, const Policy& policy, const TreeParams& params, std::mt19937_64* rng)
      : cols_(cols), values_(cols.data()), policy_(policy), params_(params), rng_(rng), d_(cols.data().cols()) {
    const std::size_t n = cols.data().rows();
    for (std::size_t f = 0; f < d_; ++f) {
      for (std::uint32_t s : cols.order(f))
        if (policy_.active(s)) order_.push_back(s);
    }
    m_ = d_ > 0 ? order_.size() / d_ : 0;
    goes_left_.assign(n, 0);
    buffer_.resize(m_);
    features_.resize(d_);
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build() {
    DecisionTree tree;
    tree.importance().assign(d_, 0.0);
    if (m_ == 0) {
      tree.nodes().push_back({});
      return tree;
    }
    struct Pending {
      int node;
      std::size_t begin, end;
      int depth;
    };
    std::vector<Pending> stack;
    tree.nodes().push_back({});
    stack.push_back({0, 0, m_, 0});
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      const Stats total = node_stats(p.begin, p.end);
      auto& node_value = tree.nodes()[static_cast<std::size_t>(p.node)].value;
      node_value = policy_.leaf_value(total);

      const bool depth_left = params_.max_depth == kUnboundedDepth || p.depth < params_.max_depth;
      if (!depth_left || p.end - p.begin < 2 || !policy_.splittable(total)) continue;

      const Split best = find_split(p.begin, p.end, total);
      if (best.feature < 0 || !policy_.worth(best.score, total)) continue;

      const std::size_t mid = partition(p.begin, p.end, best);
      const Stats left = node_stats(p.begin, mid);
      const Stats right = total.minus(left);
      tree.importance()[static_cast<std::size_t>(best.feature)] += policy_.decrease(total, left, right);

      const int l = static_cast<int>(tree.nodes().size());
      tree.nodes().push_back({});
      tree.nodes().push_back({});
      auto& node = tree.nodes()[static_cast<std::size_t>(p.node)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = l;
      node.right = l + 1;
      stack.push_back({l + 1, mid, p.end, p.depth + 1});
      stack.push_back({l, p.begin, mid, p.depth + 1});
    }
    return tree;
  }

 private:
  std::uint32_t* segment(std::size_t f) { return order_.data() + f * m_; }

  Stats node_stats(std::size_t b, std::size_t e) {
    Stats s;
    const std::uint32_t* o = segment(0);
    for (std::size_t i = b; i < e; ++i) policy_.add(s, o[i]);
    return s;
  }

  Split find_split(std::size_t b, std::size_t e, const Stats& total) {
    Split best;
    best.score = -1.0;
    const std::size_t budget = params_.max_features > 0 ? static_cast<std::size_t>(params_.max_features) : d_;
    std::size_t visited = 0;
    for (std::size_t i = 0; i < d_ && visited < budget; ++i) {
      if (rng_ && params_.max_features > 0) {
        std::uniform_int_distribution<std::size_t> pick(i, d_ - 1);
        std::swap(features_[i], features_[pick(*rng_)]);
      }
      const std::size_t f = features_[i];
      const std::uint32_t* o = segment(f);
      if (values_(o[b], f) == values_(o[e - 1], f)) continue;  // constant here; not counted
      ++visited;
      Stats left;
      for (std::size_t p = b; p + 1 < e; ++p) {
        policy_.add(left, o[p]);
        const double x = values_(o[p], f);
        const double next = values_(o[p + 1], f);
        if (!(x < next)) continue;
        const double score = left.purity() + total.minus(left).purity();
        if (score > best.score) {
          double t = x + (next - x) / 2.0;
          if (t >= next) t = x;
          best = {static_cast<int>(f), t, score};
        }
      }
    }
    return best;
  }

  std::size_t partition(std::size_t b, std::size_t e, const Split& split) {
    const std::uint32_t* o = segment(static_cast<std::size_t>(split.feature));
    std::size_t n_left = 0;
    for (std::size_t i = b; i < e; ++i) {
      const bool left = values_(o[i], static_cast<std::size_t>(split.feature)) <= split.threshold;
      goes_left_[o[i]] = left;
      n_left += left;
    }
    for (std::size_t f = 0; f < d_; ++f) {
      std::uint32_t* seg = segment(f);
      std::size_t li = b, ri = 0;
      for (std::size_t i = b; i < e; ++i) {
        if (goes_left_[seg[i]]) {
          seg[li++] = seg[i];
        } else {
          buffer_[ri++] = seg[i];
        }
      }
      std::copy_n(buffer_.begin(), ri, seg + li);
    }
    return b + n_left;
  }

  const SortedColumns& cols_;
  ColumnValues values_;
  const Policy& policy_;
  TreeParams params_;
  std::mt19937_64* rng_;
  std::size_t d_;
  std::size_t m_ = 0;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> buffer_;
  std::vector<std::size_t> features_;
};

struct GiniPolicy {
  using Stats = GiniStats;
  std::span<const std::uint32_t> weights;
  std::span<const int> labels;

  bool active(std::uint32_t s) const { return weights[s] > 0; }
  void add(Stats& st, std::uint32_t s) const { st.add(weights[s], labels[s]); }
  double leaf_value(const Stats& st) const { return st.w > 0 ? st.pos / st.w : 0.0; }
  bool splittable(const Stats& st) const { return st.pos > 0 && st.pos < st.w; }
  // Impure nodes split even on a zero-gain threshold; deeper splits may still separate.
  bool worth(double, const Stats&) const { return true; }
  double decrease(const Stats& parent, const Stats& l, const Stats& r) const {
    return std::max(0.0, parent.impurity() - l.impurity() - r.impurity());
  }
};

struct GradientPolicy {
  using Stats = GradStats;
  std::span<const double> gradient;
  std::span<const double> hessian;

  bool active(std::uint32_t) const { return true; }
  void add(Stats& st, std::uint32_t s) const { st.add(gradient[s], hessian[s]); }
  double leaf_value(const Stats& st) const { return std::abs(st.h) < 1e-150 ? 0.0 : st.g / st.h; }
  bool splittable(const Stats&) const { return true; }
  bool worth(double score, const Stats& st) const {
    return score > st.purity() + 1e-12 * std::max(1.0, std::abs(st.purity()));
  }
  double decrease(const Stats& parent, const Stats& l, const Stats& r) const {
    return std::max(0.0, l.purity() + r.purity() - parent.purity());
  }
};

}  // namespace

DecisionTree fit_gini_tree(const SortedColumns& cols, std::span<const std::uint32_t> weights, const TreeParams& params,
                           std::mt19937_64& rng) {
  GiniPolicy policy{weights, cols.data().labels};
  return Builder<GiniPolicy>(cols, policy, params, &rng).build();
}

DecisionTree fit_gradient_tree(const SortedColumns& cols, std::span<const double> gradient,
                               std::span<const double> hessian, const TreeParams& params) {
  GradientPolicy policy{gradient, hessian};
  return Builder<GradientPolicy>(cols, policy, params, nullptr).build();
}

}  // namespace fedwatch::ml
