#include "fedwatch/ml/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace fedwatch::ml {

void Dataset::add_row(std::span<const double> features, int label, InstanceRef instance, Timestamp ts) {
  if (features.size() != cols()) throw Error("row width does not match header");
  if (label != 0 && label != 1) throw Error("labels must be 0 or 1");
  for (double v : features) values.push_back(std::isfinite(v) ? v : 0.0);
  labels.push_back(label);
  instances.push_back(std::move(instance));
  timestamps.push_back(ts);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.header = header;
  out.values.reserve(indices.size() * cols());
  for (std::size_t i : indices) {
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
    out.instances.push_back(instances[i]);
    out.timestamps.push_back(timestamps[i]);
  }
  return out;
}

std::size_t Dataset::column_index(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error("column '" + name + "' not in dataset");
  return static_cast<std::size_t>(it - header.begin());
}

Dataset Dataset::drop_columns(const std::vector<std::string>& names) const {
  std::vector<bool> drop(cols(), false);
  for (const auto& n : names) drop[column_index(n)] = true;
  Dataset out;
  for (std::size_t c = 0; c < cols(); ++c)
    if (!drop[c]) out.header.push_back(header[c]);
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c)
      if (!drop[c]) out.values.push_back(at(r, c));
  out.labels = labels;
  out.instances = instances;
  out.timestamps = timestamps;
  return out;
}

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::string Dataset::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "domain";
  for (const auto& h : header) out << ',' << h;
  out << ",label\n";
  for (std::size_t r = 0; r < rows(); ++r) {
    out << instances[r].domain();
    for (double v : row(r)) out << ',' << v;
    out << ',' << labels[r] << '\n';
  }
  return out.str();
}

Dataset Dataset::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  auto head = split(line);
  if (head.size() < 2 || head.front() != "domain" || head.back() != "label") {
    throw Error("CSV header must be domain,<features...>,label");
  }
  Dataset d;
  d.header.assign(head.begin() + 1, head.end() - 1);
  std::vector<double> row(d.cols());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != head.size()) throw Error("CSV row width mismatch: " + line.substr(0, 60));
    for (std::size_t c = 0; c < d.cols(); ++c) row[c] = std::stod(cells[c + 1]);
    d.add_row(row, std::stoi(cells.back()), cells.front().empty() ? InstanceRef{} : InstanceRef(cells.front()));
  }
  return d;
}

Standardizer Standardizer::fit(const Dataset& d) {
  Standardizer s;
  const std::size_t c = d.cols();
  s.mean.assign(c, 0.0);
  s.scale.assign(c, 1.0);
  if (d.rows() == 0) return s;
  const double n = static_cast<double>(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) s.mean[j] += d.at(r, j) / n;
  std::vector<double> var(c, 0.0);
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) var[j] += (d.at(r, j) - s.mean[j]) * (d.at(r, j) - s.mean[j]) / n;
  for (std::size_t j = 0; j < c; ++j) s.scale[j] = var[j] > 0 ? std::sqrt(var[j]) : 1.0;
  return s;
}

void Standardizer::apply(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
}

Dataset Standardizer::transform(const Dataset& d) const {
  Dataset out = d;
  for (std::size_t r = 0; r < out.rows(); ++r) apply({out.values.data() + r * out.cols(), out.cols()});
  return out;
}

void to_json(nlohmann::json& j, const Standardizer& s) { j = {{"mean", s.mean}, {"scale", s.scale}}; }
void from_json(const nlohmann::json& j, Standardizer& s) {
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
}

void to_json(nlohmann::json& j, const EvalMetrics& m) {
  j = {{"accuracy", m.accuracy},
       {"precision", m.precision},
       {"recall", m.recall},
       {"f1", m.f1},
       {"confusion", {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}, {"tn", m.confusion.tn}}}};
}

EvalMetrics compute_metrics(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) throw Error("prediction/label length mismatch");
  if (predicted.empty()) throw Error("cannot evaluate on an empty dataset");
  EvalMetrics m;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == 1) {
      (actual[i] == 1 ? c.tp : c.fp)++;
    } else {
      (actual[i] == 1 ? c.fn : c.tn)++;
    }
  }
  const auto n = static_cast<double>(predicted.size());
  m.accuracy = static_cast<double>(c.tp + c.tn) / n;
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::array<std::vector<std::size_t>, 2> shuffled_by_class(std::span<const int> labels, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);
  return by_class;
}

}  // namespace

std::vector<std::vector<std::size_t>> kfold_splits(std::size_t n, std::size_t k, std::span<const int> labels,
                                                   std::uint64_t seed) {
  if (k < 2) throw Error("kfold: k must be at least 2");
  if (labels.size() != n) throw Error("kfold: label count does not match n");
  if (n < k) throw Error("kfold: fewer rows than folds");
  auto by_class = shuffled_by_class(labels, seed);
  for (const auto& members : by_class) {
    if (members.size() < k) throw Error("kfold: a class has fewer members than folds (degenerate fold)");
  }
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t cursor = 0;
  for (const auto& members : by_class)
    for (std::size_t i : members) folds[cursor++ % k].push_back(i);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                                               double train_fraction,
                                                                               std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("split fraction must be in (0, 1)");
  auto by_class = shuffled_by_class(labels, seed);
  // Round the total first so the overall split is exact, then give the
  // positives their rounded share.
  const auto total = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(labels.size())));
  const auto pos = std::min(total, static_cast<std::size_t>(std::llround(
                                       train_fraction * static_cast<double>(by_class[1].size()))));
  const std::array<std::size_t, 2> quota{std::min(total - pos, by_class[0].size()), pos};
  std::vector<std::size_t> train, test;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& members = by_class[c];
    const auto n_train = quota[c];
    train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

}  // namespace fedwatch::ml
