// One line per acceptance criterion; exit status 1 when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "fedwatch/analytics.hpp"
#include "fedwatch/crawler.hpp"
#include "fedwatch/learners.hpp"
#include "fedwatch/mock_server.hpp"
#include "fedwatch/policy.hpp"
#include "fedwatch/stats.hpp"
#include "fedwatch/synthcorpus.hpp"
#include "fedwatch/watchgen.hpp"
#include "lag_fixture.hpp"
#include "test_util.hpp"

using namespace fedwatch;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Shared default corpus; generated once.
const Store& default_store() {
  static Store store = [] {
    auto s = Store::in_memory();
    generate_corpus(CorpusParams{}, s);
    return s;
  }();
  return store;
}

// ---------------------------------------------------------------- C1

struct Brute {
  double acc, prec, rec, f1;
};

Brute brute_metrics(const std::vector<int>& pred, const std::vector<int>& act) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && act[i]) tp += 1;
    if (pred[i] && !act[i]) fp += 1;
    if (!pred[i] && act[i]) fn += 1;
    if (!pred[i] && !act[i]) tn += 1;
  }
  const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  return {(tp + tn) / static_cast<double>(pred.size()), prec, rec, f1};
}

bool same(const EvalMetrics& m, const Brute& b) {
  return m.accuracy == b.acc && m.precision == b.prec && m.recall == b.rec && m.f1 == b.f1;
}

Verdict c1_metric_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::bernoulli_distribution coin(static_cast<double>(rng() % 101) / 100.0);
    std::vector<int> pred(n), act(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = coin(rng);
      act[i] = coin(rng);
    }
    mismatches += !same(ml::compute_metrics(pred, act), brute_metrics(pred, act));
  }
  // evaluate() on fitted models against a confusion matrix of their own predictions.
  std::size_t model_mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Dataset d;
    d.header = {"a", "b"};
    std::normal_distribution<double> g(0, 1);
    for (int i = 0; i < 60; ++i) {
      const double a = g(rng), b = g(rng);
      d.add_row(std::vector<double>{a, b}, a + 0.5 * g(rng) > 0 ? 1 : 0);
    }
    const auto model = fit_point(Family::lr, d, {{"C", 1.0}}, rng());
    std::vector<int> pred, act;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      pred.push_back(model.predict(d.row(i)));
      act.push_back(d.labels[i]);
    }
    model_mismatches += !same(evaluate(model, d), brute_metrics(pred, act));
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && model_mismatches == 0 && secs < 5.0,
          "1000 vectors, " + std::to_string(mismatches) + " mismatches; evaluate() on 20 models, " +
              std::to_string(model_mismatches) + " mismatches; " + fmt(secs, 2) + " s"};
}

// ---------------------------------------------------------------- C2

std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Verdict c2_spearman_oracle() {
  std::mt19937_64 rng(202);
  double worst = 0;
  int with_ties = 0, done = 0;
  while (done < 100) {
    const std::size_t n = 2 + rng() % 80;
    const int range = 2 + static_cast<int>(rng() % 30);  // small ranges force ties
    std::uniform_int_distribution<int> u(0, range);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = u(rng);
      y[i] = (rng() % 3 == 0) ? x[i] + u(rng) : u(rng);
    }
    const auto rx = brute_ranks(x), ry = brute_ranks(y);
    if (std::set<double>(rx.begin(), rx.end()).size() < 2 || std::set<double>(ry.begin(), ry.end()).size() < 2)
      continue;
    with_ties += std::set<double>(x.begin(), x.end()).size() < n;
    worst = std::max(worst, std::abs(spearman(x, y) - pearson(rx, ry)));
    ++done;
  }
  return {worst <= 1e-9, "100 vectors (" + std::to_string(with_ties) + " with ties), max |diff| = " + std::to_string(worst)};
}

// ---------------------------------------------------------------- C3

Verdict c3_box_cox() {
  std::mt19937_64 rng(303);
  bool analytic = true;
  std::uniform_real_distribution<double> pos(1e-3, 1e4);
  for (int i = 0; i < 1000; ++i) {
    const double x = pos(rng);
    analytic = analytic && box_cox(x, 1.0) == x - 1.0 && box_cox(x, 0.0) == std::log(x);
  }
  struct Case {
    double lambda, mu, sigma;
  };
  const std::vector<Case> cases{{0.0, 2.0, 0.5}, {0.5, 10.0, 1.0}, {2.0, 10.0, 1.0}, {-0.5, 0.5, 0.2}, {1.0, 20.0, 3.0}};
  std::string detail;
  bool recovered = true;
  for (const auto& c : cases) {
    std::normal_distribution<double> g(c.mu, c.sigma);
    std::vector<double> xs;
    while (xs.size() < 10000) {
      const double y = g(rng);
      const double x = c.lambda == 0.0 ? std::exp(y) : std::pow(c.lambda * y + 1.0, 1.0 / c.lambda);
      if (std::isfinite(x) && x > 0) xs.push_back(x);
    }
    const double fit = fit_box_cox(xs);
    recovered = recovered && std::abs(fit - c.lambda) <= 0.2;
    detail += " " + fmt(c.lambda, 1) + "->" + fmt(fit, 3);
  }
  return {analytic && recovered, std::string("analytic cases ") + (analytic ? "exact" : "NOT exact") +
                                     "; MLE on n=10000 (true->fit):" + detail};
}

// ---------------------------------------------------------------- C4

Dataset synthetic_rows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Dataset d;
  for (int j = 0; j < 8; ++j) d.header.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(8);
    for (auto& v : row) v = g(rng);
    const double z = 1.5 * row[0] - row[1] + 0.8 * row[2] * row[3] + 0.5 * g(rng);
    d.add_row(row, z > 0.3 ? 1 : 0);
  }
  return d;
}

Verdict c4_grid_contract() {
  const auto t0 = Clock::now();
  const auto data = synthetic_rows(500, 404);
  bool ok = true;
  std::string detail;

  const auto folds = ml::kfold_splits(data.rows(), 5, data.labels, 9);
  std::vector<int> seen(data.rows(), 0);
  std::size_t lo = data.rows(), hi = 0;
  for (const auto& f : folds) {
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
    for (auto i : f) seen[i]++;
  }
  const bool partition = folds.size() == 5 && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
  ok = ok && partition && hi - lo <= 1;
  detail += "folds " + std::to_string(lo) + ".." + std::to_string(hi) + (partition ? " partition" : " NOT a partition");

  for (auto family : kAllFamilies) {
    const auto grid = HyperGrid::standard(family);
    const auto a = train(family, data, grid, 17);
    const auto b = train(family, data, grid, 17);
    const bool in_grid = grid.contains(a.params);
    const bool stable = a.params == b.params && a.serialize() == b.serialize();
    ok = ok && in_grid && stable && a.cv.size() == grid.points().size();
    detail += "; " + std::string(to_string(family)) + " " + a.params.dump() + (in_grid ? "" : " NOT in grid") +
              (stable ? "" : " NOT reproducible");
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  return {ok, detail + "; " + fmt(secs, 1) + " s"};
}

// ---------------------------------------------------------------- C5 / C6

constexpr int kSplitSeeds = 10;

struct GlobalRuns {
  std::vector<double> rf, lr, rf_ablated, negative_baseline;
  double seconds = 0;
};

const GlobalRuns& global_runs() {
  static GlobalRuns runs = [] {
    GlobalRuns r;
    const auto t0 = Clock::now();
    const auto& store = default_store();
    for (int s = 1; s <= kSplitSeeds; ++s) {
      const auto data = build_global_dataset(store, 0.8, s);
      r.rf.push_back(run_experiment(Family::rf, data, HyperGrid::standard(Family::rf), s).test.f1);
      r.lr.push_back(run_experiment(Family::lr, data, HyperGrid::standard(Family::lr), s).test.f1);
      auto ablated = data;
      ablated.train = ablate_post_features(data.train);
      ablated.test = ablate_post_features(data.test);
      r.rf_ablated.push_back(run_experiment(Family::rf, ablated, HyperGrid::standard(Family::rf), s).test.f1);
      std::vector<int> none(data.test.rows(), 0);
      r.negative_baseline.push_back(ml::compute_metrics(none, data.test.labels).f1);
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return runs;
}

Verdict c5_global() {
  const auto& r = global_runs();
  const double rf = mean(r.rf), lr = mean(r.lr);
  return {rf >= 0.70 && rf >= lr && r.seconds < 300.0,
          "mean test F1 over " + std::to_string(kSplitSeeds) + " stratified splits: RF " + fmt(rf) + ", LR " + fmt(lr) +
              " (split 1: RF " + fmt(r.rf[0]) + ", LR " + fmt(r.lr[0]) + "); " + fmt(r.seconds, 1) + " s incl. ablation"};
}

Verdict c6_ablation() {
  const auto& r = global_runs();
  const double full = mean(r.rf), ablated = mean(r.rf_ablated), baseline = mean(r.negative_baseline);
  int lower = 0;
  for (int s = 0; s < kSplitSeeds; ++s) lower += r.rf_ablated[s] < r.rf[s];
  return {ablated < full && ablated > baseline,
          "RF mean F1 " + fmt(full) + " -> " + fmt(ablated) + " without posts/posts_tr (lower on " +
              std::to_string(lower) + "/" + std::to_string(kSplitSeeds) + " splits); all-negative baseline " +
              fmt(baseline)};
}

// ---------------------------------------------------------------- C7

Verdict c7_windows() {
  const auto plan = build_window_datasets(default_store(), 0.8, 1);
  const auto results = run_window_experiments(Family::rf, plan, HyperGrid::standard(Family::rf), 1);
  std::string curve;
  double best = -1;
  int best_month = 0;
  for (const auto& w : results) {
    curve += " " + fmt(w.experiment.test.f1, 2);
    if (w.experiment.test.f1 > best) {
      best = w.experiment.test.f1;
      best_month = w.month;
    }
  }
  const double first = results.empty() ? 0.0 : results.front().experiment.test.f1;
  return {results.size() == 9 && best >= first,
          std::to_string(results.size()) + " windows, F1 by month:" + curve + "; best month " +
              std::to_string(best_month) + " (" + fmt(best) + ") vs month 1 (" + fmt(first) + ")"};
}

// ---------------------------------------------------------------- C8

constexpr double kLocalBandLow = 0.40;
constexpr double kLocalBandHigh = 0.70;

Verdict c8_local() {
  const auto t0 = Clock::now();
  const CorpusParams params;
  const auto summary =
      run_local_experiments(default_store(), Family::rf, HyperGrid::standard(Family::rf), 1, params.large_instance_posts);
  const bool in_band = summary.mean_f1 >= kLocalBandLow && summary.mean_f1 <= kLocalBandHigh;
  const bool ordered = summary.large_evaluated > 0 && summary.small_evaluated > 0 &&
                       summary.large_mean_f1 > summary.small_mean_f1;
  return {summary.evaluated > 0 && in_band && ordered,
          "mean F1 " + fmt(summary.mean_f1) + " over " + std::to_string(summary.evaluated) + " instances (band [" +
              fmt(kLocalBandLow, 2) + ", " + fmt(kLocalBandHigh, 2) + "]); large " + fmt(summary.large_mean_f1) + " (" +
              std::to_string(summary.large_evaluated) + ") vs small " + fmt(summary.small_mean_f1) + " (" +
              std::to_string(summary.small_evaluated) + "); " + fmt(seconds_since(t0), 1) + " s"};
}

// ---------------------------------------------------------------- C9

Verdict c9_lags() {
  // Hand computation for the five-instance fixture: a->c 15, b->d 0, c->e 30, e->a 7.5 days.
  auto store = Store::in_memory();
  testing::replay(store, testing::five_instance_events());
  const auto lags = response_lags(store);
  const std::vector<std::tuple<std::string, std::string, double>> want{
      {"a.example", "c.example", 15.0}, {"b.example", "d.example", 0.0}, {"c.example", "e.example", 30.0},
      {"e.example", "a.example", 7.5}};
  bool fixture_ok = lags.size() == want.size();
  for (std::size_t k = 0; fixture_ok && k < want.size(); ++k) {
    const auto& [s, t, d] = want[k];
    fixture_ok = lags[k].source.domain() == s && lags[k].target.domain() == t && lags[k].lag_days == d;
  }
  if (fixture_ok) {
    const auto cdf = empirical_cdf(lag_days(lags));
    fixture_ok = cdf(-0.1) == 0.0 && cdf(0) == 0.25 && cdf(7.5) == 0.5 && cdf(15) == 0.75 && cdf(29.99) == 0.75 &&
                 cdf(30) == 1.0;
  }

  const CorpusParams params;
  const auto synth = lag_days(response_lags(default_store()));
  const double recovered = mean(synth);
  const double rel = std::abs(recovered - params.delay_mean_days) / params.delay_mean_days;
  return {fixture_ok && rel <= 0.10,
          std::string("fixture records and CDF ") + (fixture_ok ? "exact" : "MISMATCH") + "; synthetic mean lag " +
              fmt(recovered, 2) + " d over " + std::to_string(synth.size()) + " records vs planted " +
              fmt(params.delay_mean_days, 1) + " d (" + fmt(100 * rel, 1) + "% off)"};
}

// ---------------------------------------------------------------- C10

Verdict c10_crawler() {
  const auto world = MockWorld::load(testing::fixture("crawl/world.json"));
  MockServer server(world);
  CrawlConfig config;
  for (const auto& s : world.expected.at("seeds")) config.seed_instances.emplace_back(s.get<std::string>());
  config.per_host_min_interval_ms = 150;
  config.max_concurrency = 3;
  config.timeout_ms = 400;
  config.mock_base_url = server.base_url();
  Crawler crawler(config);
  auto store = Store::in_memory();
  const auto report = crawler.crawl_cycle(store, 1'640'000'000);

  std::map<std::string, std::size_t> designed;
  bool per_instance = true;
  for (const auto& [domain, cls] : world.expected.at("classes").items()) {
    designed[cls.get<std::string>()]++;
    auto it = report.instance_outcomes.find(InstanceRef(domain));
    per_instance = per_instance && it != report.instance_outcomes.end() && to_string(it->second.cls) == cls.get<std::string>();
  }
  bool tallies = per_instance;
  for (auto c : kAllFetchClasses) {
    auto it = designed.find(std::string(to_string(c)));
    tallies = tallies && report.count(c) == (it == designed.end() ? 0 : it->second);
  }

  const auto log = server.requests();
  std::map<std::string, std::vector<MockRequest>> by_host;
  for (const auto& r : log) by_host[r.host].push_back(r);
  auto min_gap = std::chrono::steady_clock::duration::max();
  for (auto& [_, reqs] : by_host) {
    std::sort(reqs.begin(), reqs.end(), [](const auto& a, const auto& b) { return a.received < b.received; });
    for (std::size_t k = 1; k < reqs.size(); ++k) min_gap = std::min(min_gap, reqs[k].received - reqs[k - 1].finished);
  }
  const bool polite = min_gap >= std::chrono::milliseconds(config.per_host_min_interval_ms);
  const bool bounded = server.max_in_flight() <= static_cast<std::size_t>(config.max_concurrency);

  const std::set<std::string> fixed{"/api/v1/instance/peers", "/api/v1/instance", "/.well-known/nodeinfo",
                                    "/nodeinfo/2.0.json", "/api/v1/timelines/public?local=true&limit=40"};
  const std::string paged = "/api/v1/timelines/public?local=true&limit=40&max_id=";
  std::size_t bad_paths = 0;
  for (const auto& r : log)
    bad_paths += !(fixed.contains(r.target) ||
                   (r.target.rfind(paged, 0) == 0 && r.target.size() > paged.size() &&
                    r.target.find_first_of("&?#", paged.size()) == std::string::npos));

  const double gap_ms = std::chrono::duration<double, std::milli>(min_gap).count();
  return {tallies && polite && bounded && bad_paths == 0,
          std::string("tallies ") + (tallies ? "match design" : "DIFFER from design") + " over " +
              std::to_string(report.attempted) + " instances; " + std::to_string(log.size()) +
              " requests, min same-host gap " + fmt(gap_ms, 0) + " ms (>= " +
              std::to_string(config.per_host_min_interval_ms) + "), max in flight " +
              std::to_string(server.max_in_flight()) + " (<= " + std::to_string(config.max_concurrency) + "), " +
              std::to_string(bad_paths) + " off-contract paths"};
}

// ---------------------------------------------------------------- C11

Verdict c11_importance() {
  CorpusParams params;
  params.label_driver = "volume";
  auto store = Store::in_memory();
  generate_corpus(params, store);
  const auto data = build_global_dataset(store, 0.8, 1);
  const auto e = run_experiment(Family::rf, data, HyperGrid::standard(Family::rf), 1);
  const auto ranking = feature_importance(e.model);
  std::set<std::string> top3;
  std::string shown;
  for (std::size_t k = 0; k < 3 && k < ranking.size(); ++k) {
    top3.insert(ranking[k].first);
    shown += (k ? ", " : "") + ranking[k].first + " " + fmt(ranking[k].second);
  }
  return {top3.contains("posts") && top3.contains("posts_tr"), "volume-driven corpus, RF top 3: " + shown};
}

// ---------------------------------------------------------------- C12

Verdict c12_defaults() {
  const json table = json::parse(testing::read_file(testing::fixture("defaults/version_table.json")));
  std::size_t rows = 0, wrong = 0;
  std::string misses;
  for (const auto& row : table.at("rows")) {
    ++rows;
    const auto policy = row.at("policy").get<std::string>();
    const auto version = row.at("version").get<std::string>();
    if (classify_default(policy, version) != row.at("default").get<bool>()) {
      ++wrong;
      misses += " " + policy + "@" + version;
    }
  }
  return {rows == 12 && wrong == 0,
          std::to_string(rows) + " (policy, version) pairs, " + std::to_string(wrong) + " misclassified" + misses};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"C1 metric oracle", c1_metric_oracle},
      {"C2 spearman oracle", c2_spearman_oracle},
      {"C3 box-cox", c3_box_cox},
      {"C4 grid-search contract", c4_grid_contract},
      {"C5 global task", c5_global},
      {"C6 post-feature ablation", c6_ablation},
      {"C7 training windows", c7_windows},
      {"C8 local task", c8_local},
      {"C9 response lags", c9_lags},
      {"C10 crawler conformance", c10_crawler},
      {"C11 feature importance", c11_importance},
      {"C12 default-policy classification", c12_defaults},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
