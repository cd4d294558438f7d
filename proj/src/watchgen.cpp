#include "fedwatch/watchgen.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace fedwatch {

using nlohmann::json;

namespace {

constexpr std::size_t kMinClassMembers = 10;
constexpr std::size_t kMaxFolds = 5;
constexpr std::size_t kExplainedFeatures = 3;

// Instances listed as a simple-policy target by another instance in some
// ok snapshot inside the window.
std::set<InstanceRef> targeted_in(const Store& store, const TimeWindow& window) {
  std::set<InstanceRef> out;
  for (const auto& s : store.snapshots()) {
    if (!s.fetch_status.ok() || !window.contains(s.observed_at)) continue;
    for (const auto& t : s.policy_config.simple_targets)
      if (t.target != s.instance) out.insert(t.target);
  }
  return out;
}

// Latest ok snapshot per instance inside the window.
std::map<InstanceRef, const InstanceSnapshot*> latest_in(const Store& store, const TimeWindow& window) {
  std::map<InstanceRef, const InstanceSnapshot*> out;
  for (const auto& s : store.snapshots()) {
    if (!s.fetch_status.ok() || !window.contains(s.observed_at)) continue;
    auto& slot = out[s.instance];
    if (!slot || slot->observed_at <= s.observed_at) slot = &s;
  }
  return out;
}

std::vector<int> labels_of(const std::vector<LabeledInstance>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.label);
  return out;
}

std::vector<LabeledInstance> pick(const std::vector<LabeledInstance>& rows, const std::vector<std::size_t>& idx) {
  std::vector<LabeledInstance> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(rows[i]);
  return out;
}

std::vector<LabeledInstance> relabel(std::vector<LabeledInstance> rows, const std::set<InstanceRef>& positives) {
  for (auto& r : rows) r.label = positives.contains(r.instance) ? 1 : 0;
  return rows;
}

BoxCoxLambdas fit_lambdas(const FeatureExtractor& fx, const std::vector<LabeledInstance>& rows,
                          const TimeWindow& window) {
  std::vector<FeatureVector> raw;
  for (const auto& r : rows)
    if (fx.has_snapshot_in(r.instance, window)) raw.push_back(fx.extract(r.instance, window));
  if (raw.empty()) throw Error("no training instance has a snapshot in the training window");
  return BoxCoxLambdas::fit(raw);
}

std::size_t minority(const Dataset& d) {
  const std::size_t pos = d.positives();
  return std::min(pos, d.rows() - pos);
}

}  // namespace

void to_json(json& j, const BoxCoxLambdas& l) {
  j = {{"posts", l.posts}, {"users", l.users}, {"hate_count", l.hate_count}, {"url_count", l.url_count}};
}

void from_json(const json& j, BoxCoxLambdas& l) {
  try {
    j.at("posts").get_to(l.posts);
    j.at("users").get_to(l.users);
    j.at("hate_count").get_to(l.hate_count);
    j.at("url_count").get_to(l.url_count);
  } catch (const json::exception& e) {
    throw Error(std::string("bad Box-Cox lambdas: ") + e.what());
  }
}

Observation Observation::of(const Store& store) {
  const auto span = store.time_span();
  if (!span) throw Error("the store holds no snapshots");
  Observation o;
  o.start = span->first;
  o.months = static_cast<int>((span->second - span->first) / kMonthSeconds) + 1;
  return o;
}

std::vector<LabeledInstance> label_instances(const Store& store, const TimeWindow& window) {
  const auto targeted = targeted_in(store, window);
  std::vector<LabeledInstance> out;
  for (const auto& [ref, snap] : latest_in(store, window)) {
    if (!snap->policy_config.exposed) continue;
    out.push_back({ref, targeted.contains(ref) ? 1 : 0});
  }
  return out;
}

std::vector<LabeledInstance> label_peers(const Store& store, const InstanceRef& source, const TimeWindow& window) {
  std::set<InstanceRef> peers, targets;
  for (const auto& e : store.edges())
    if (e.source == source && e.first_seen < window.end && e.target != source) peers.insert(e.target);
  for (const auto& s : store.snapshots()) {
    if (s.instance != source || !s.fetch_status.ok() || !window.contains(s.observed_at)) continue;
    for (const auto& t : s.policy_config.simple_targets) targets.insert(t.target);
  }
  std::vector<LabeledInstance> out;
  for (const auto& p : peers) out.push_back({p, targets.contains(p) ? 1 : 0});
  return out;
}

std::vector<std::string> selected_header() {
  std::vector<std::string> out;
  for (auto name : SelectedFeatures::names()) out.emplace_back(name);
  return out;
}

Dataset feature_rows(const FeatureExtractor& fx, const std::vector<LabeledInstance>& rows, const TimeWindow& window,
                     const BoxCoxLambdas& lambdas) {
  Dataset d;
  d.header = selected_header();
  for (const auto& r : rows) {
    if (!fx.has_snapshot_in(r.instance, window)) continue;
    const auto selected = select_features(fx.extract(r.instance, window, &lambdas));
    d.add_row(selected.values, r.label, r.instance, window.end);
  }
  return d;
}

SplitDatasets build_global_dataset(const Store& store, double train_fraction, std::uint64_t seed) {
  const auto obs = Observation::of(store);
  const auto window = obs.full();
  const auto population = label_instances(store, window);
  const auto labels = labels_of(population);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (pos < kMinClassMembers || population.size() - pos < kMinClassMembers)
    throw Error("global dataset needs at least 10 instances per class (have " + std::to_string(pos) + " positive, " +
                std::to_string(population.size() - pos) + " negative)");

  const auto [train_idx, test_idx] = ml::stratified_split(labels, train_fraction, seed);
  FeatureExtractor fx(store);
  SplitDatasets out;
  out.train_window = window;
  out.test_window = window;
  const auto train_rows = pick(population, train_idx);
  out.lambdas = fit_lambdas(fx, train_rows, window);
  out.train = feature_rows(fx, train_rows, window, out.lambdas);
  out.test = feature_rows(fx, pick(population, test_idx), window, out.lambdas);
  return out;
}

WindowPlan build_window_datasets(const Store& store, double train_fraction, std::uint64_t seed) {
  const auto obs = Observation::of(store);
  const auto full = obs.full();
  WindowPlan plan;
  const int last = std::min(kMaxWindowMonths, obs.months - 1);
  if (last < kMaxWindowMonths)
    plan.warnings.push_back("only " + std::to_string(obs.months) + " months observed; producing " +
                            std::to_string(std::max(last, 0)) + " window experiments instead of " +
                            std::to_string(kMaxWindowMonths));
  if (last < 1) return plan;

  const auto population = label_instances(store, full);
  const auto [train_idx, test_idx] = ml::stratified_split(labels_of(population), train_fraction, seed);
  const auto train_base = pick(population, train_idx);
  const auto test_rows = pick(population, test_idx);
  FeatureExtractor fx(store);

  for (int m = 1; m <= last; ++m) {
    WindowDatasets w;
    w.month = m;
    w.data.train_window = {obs.start, obs.month_end(m)};
    w.data.test_window = {obs.month_end(m), full.end};
    const auto train_rows = relabel(train_base, targeted_in(store, w.data.train_window));
    w.data.lambdas = fit_lambdas(fx, train_rows, w.data.train_window);
    w.data.train = feature_rows(fx, train_rows, w.data.train_window, w.data.lambdas);
    w.data.test = feature_rows(fx, test_rows, w.data.test_window, w.data.lambdas);
    plan.windows.push_back(std::move(w));
  }
  return plan;
}

LocalDatasets build_local_dataset(const Store& store, const FeatureExtractor& fx, const InstanceRef& instance,
                                  const LocalOptions& options, std::uint64_t seed) {
  const auto obs = Observation::of(store);
  const int k = std::min(options.train_months, obs.months - 1);
  if (k < 1) throw Error("local datasets need at least two observed months");
  const auto full = obs.full();
  const TimeWindow train_window{obs.start, obs.month_end(k)};
  const TimeWindow test_window{obs.month_end(obs.months - k), full.end};

  const auto final_peers = label_peers(store, instance, full);
  if (final_peers.empty()) throw Error(instance.domain() + " has no federated peers");
  const auto [train_idx, test_idx] = ml::stratified_split(labels_of(final_peers), options.train_fraction, seed);

  // Training peers must already be known, and labeled, inside the training window.
  std::map<InstanceRef, int> early;
  for (const auto& p : label_peers(store, instance, train_window)) early[p.instance] = p.label;
  std::vector<LabeledInstance> train_rows;
  for (std::size_t i : train_idx)
    if (auto it = early.find(final_peers[i].instance); it != early.end()) train_rows.push_back({it->first, it->second});

  // Shared lambdas keep the transformed columns comparable across windows.
  std::vector<FeatureVector> raw;
  for (const auto& r : train_rows)
    if (fx.has_snapshot_in(r.instance, train_window)) raw.push_back(fx.extract(r.instance, train_window));
  const auto lambdas = raw.empty() ? BoxCoxLambdas{} : BoxCoxLambdas::fit(raw);

  LocalDatasets out;
  out.instance = instance;
  out.train = feature_rows(fx, train_rows, train_window, lambdas);
  out.test = feature_rows(fx, pick(final_peers, test_idx), test_window, lambdas);
  if (out.train.empty()) throw Error(instance.domain() + " has no peers with features in the training window");
  if (minority(out.train) == 0) throw Error(instance.domain() + " has a single-class training set");
  return out;
}

Dataset ablate_post_features(const Dataset& data) { return data.drop_columns({"posts", "posts_tr"}); }

// ---------------------------------------------------------------- experiments

Experiment run_experiment(Family family, const SplitDatasets& data, const HyperGrid& grid, std::uint64_t seed) {
  if (data.test.empty()) throw Error("empty test set");
  Experiment e;
  e.model = train(family, data.train, grid, seed, kMaxFolds);
  e.model.metadata["box_cox"] = data.lambdas;
  e.model.metadata["train_window"] = {data.train_window.begin, data.train_window.end};
  e.test = evaluate(e.model, data.test);
  e.train_rows = data.train.rows();
  e.test_rows = data.test.rows();
  e.test_positives = data.test.positives();
  return e;
}

std::vector<WindowResult> run_window_experiments(Family family, const WindowPlan& plan, const HyperGrid& grid,
                                                 std::uint64_t seed) {
  std::vector<WindowResult> out;
  for (const auto& w : plan.windows) out.push_back({w.month, run_experiment(family, w.data, grid, seed)});
  return out;
}

LocalSummary run_local_experiments(const Store& store, Family family, const HyperGrid& grid, std::uint64_t seed,
                                   double large_instance_posts, const LocalOptions& options) {
  const auto obs = Observation::of(store);
  const auto full = obs.full();
  FeatureExtractor fx(store);
  LocalSummary summary;
  double sum = 0, large_sum = 0, small_sum = 0;
  for (const auto& [ref, snap] : latest_in(store, full)) {
    if (!snap->policy_config.exposed) continue;
    LocalResult r;
    r.instance = ref;
    r.posts = static_cast<std::int64_t>(fx.extract(ref, full)[Feature::posts]);
    r.large = static_cast<double>(r.posts) >= large_instance_posts;
    try {
      const auto local = build_local_dataset(store, fx, ref, options, ml::mix_seed(seed, summary.results.size()));
      r.rows = local.train.rows() + local.test.rows();
      r.positives = local.train.positives() + local.test.positives();
      const std::size_t folds = std::min(kMaxFolds, minority(local.train));
      if (folds < 2) {
        r.skipped = "fewer than two training rows in the minority class";
      } else if (local.test.empty() || local.test.positives() == 0) {
        r.skipped = "no positive test rows";
      } else {
        const auto model = train(family, local.train, grid, seed, folds);
        r.f1 = evaluate(model, local.test).f1;
      }
    } catch (const Error& e) {
      r.skipped = e.what();
    }
    if (r.f1) {
      sum += *r.f1;
      ++summary.evaluated;
      if (r.large) {
        large_sum += *r.f1;
        ++summary.large_evaluated;
      } else {
        small_sum += *r.f1;
        ++summary.small_evaluated;
      }
    }
    summary.results.push_back(std::move(r));
  }
  auto mean = [](double s, std::size_t n) { return n ? s / static_cast<double>(n) : 0.0; };
  summary.mean_f1 = mean(sum, summary.evaluated);
  summary.large_mean_f1 = mean(large_sum, summary.large_evaluated);
  summary.small_mean_f1 = mean(small_sum, summary.small_evaluated);
  return summary;
}

// ---------------------------------------------------------------- watchlist

Dataset candidate_rows(const Store& store, const TrainedModel& model) {
  BoxCoxLambdas lambdas;
  if (model.metadata.contains("box_cox")) lambdas = model.metadata.at("box_cox").get<BoxCoxLambdas>();
  const auto window = Observation::of(store).full();
  std::vector<LabeledInstance> rows;
  for (const auto& [ref, _] : latest_in(store, window)) rows.push_back({ref, 0});
  FeatureExtractor fx(store);
  auto d = feature_rows(fx, rows, window, lambdas);
  if (d.header == model.header) return d;
  std::vector<std::string> dropped;
  for (const auto& h : d.header)
    if (std::find(model.header.begin(), model.header.end(), h) == model.header.end()) dropped.push_back(h);
  d = d.drop_columns(dropped);
  if (d.header != model.header) throw Error("model columns are not a subset of the selected features");
  return d;
}

std::vector<WatchlistEntry> generate_watchlist(const TrainedModel& model, const Dataset& candidates, double threshold,
                                               std::optional<std::size_t> top_k) {
  if (!candidates.empty() && candidates.header != model.header)
    throw Error("candidate columns do not match the model header");
  std::vector<WatchlistEntry> all;
  for (std::size_t r = 0; r < candidates.rows(); ++r)
    all.push_back({candidates.instances[r], model.predict_proba(candidates.row(r)), 0, {}});
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (all[a].score != all[b].score) return all[a].score > all[b].score;
    return all[a].instance < all[b].instance;
  });

  std::vector<std::string> global_top;
  if (explainable(model.family) && model.family != Family::lr) {
    for (const auto& [name, _] : feature_importance(model)) {
      if (global_top.size() == kExplainedFeatures) break;
      global_top.push_back(name);
    }
  }

  std::vector<WatchlistEntry> out;
  for (std::size_t i : order) {
    if (top_k ? out.size() >= *top_k : all[i].score < threshold) break;
    auto e = all[i];
    e.rank = out.size() + 1;
    if (model.family == Family::lr) {
      const auto& lr = std::get<ml::LogisticModel>(model.fitted);
      std::vector<double> z(candidates.row(i).begin(), candidates.row(i).end());
      if (!model.standardizer.empty()) model.standardizer.apply(z);
      std::vector<double> contribution(z.size());
      for (std::size_t c = 0; c < z.size(); ++c) contribution[c] = std::abs(lr.coef[c] * z[c]);
      for (const auto& [name, _] : rank_weights(model.header, contribution)) {
        if (e.top_features.size() == kExplainedFeatures) break;
        e.top_features.push_back(name);
      }
    } else {
      e.top_features = global_top;
    }
    out.push_back(std::move(e));
  }
  return out;
}

json watchlist_json(const std::vector<WatchlistEntry>& entries) {
  json out = json::array();
  for (const auto& e : entries) {
    json j = {{"domain", e.instance.domain()}, {"score", e.score}, {"rank", e.rank}};
    if (!e.top_features.empty()) j["features"] = e.top_features;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace fedwatch
