#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "fedwatch/analytics.hpp"
#include "fedwatch/codec.hpp"
#include "fedwatch/crawler.hpp"
#include "fedwatch/features.hpp"
#include "fedwatch/learners.hpp"
#include "fedwatch/policy.hpp"
#include "fedwatch/stats.hpp"
#include "fedwatch/store.hpp"
#include "fedwatch/synthcorpus.hpp"
#include "fedwatch/text.hpp"
#include "fedwatch/watchgen.hpp"

namespace fedwatch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad flag combinations found after parsing; reported like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
  spdlog::info("wrote {}", path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

// Read-only commands must not conjure an empty store out of a typo.
Store open_existing(const fs::path& root) {
  if (!fs::exists(root / "snapshots.ndjson") && !fs::exists(root / "meta.json"))
    throw Error("no store at " + root.string());
  return Store::open(root);
}

Timestamp unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

Timestamp last_observation(const Store& store) {
  const auto span = store.time_span();
  if (!span) throw Error("store holds no snapshots");
  return span->second;
}

std::string csv_number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

// ------------------------------------------------------------ report JSON

json footprint_json(const std::vector<FootprintRow>& rows) {
  json a = json::array();
  for (const auto& r : rows)
    a.push_back({{"policy", r.policy},
                 {"pct_instances", r.pct_instances},
                 {"pct_users", r.pct_users},
                 {"pct_posts", r.pct_posts},
                 {"instances", r.instances}});
  return a;
}

json growth_json(const GrowthSeries& g) {
  return {{"times", g.times},
          {"names", g.names},
          {"pct", g.pct},
          {"total_policies", g.total_policies},
          {"exposed_instances", g.exposed_instances}};
}

json admins_json(const AdminHistogram& h) {
  json counts = json::object(), fractions = json::object();
  for (const auto& [k, n] : h.counts) counts[std::to_string(k)] = n;
  for (const auto& [k, f] : h.fractions()) fractions[std::to_string(k)] = f;
  return {{"total", h.total}, {"counts", counts}, {"fractions", fractions}};
}

json lags_json(const std::vector<LagRecord>& lags) {
  json records = json::array();
  for (const auto& l : lags)
    records.push_back({{"source", l.source.domain()},
                       {"target", l.target.domain()},
                       {"federated_at", l.federated_at},
                       {"policy_at", l.policy_at},
                       {"lag_days", l.lag_days}});
  json out = {{"n", lags.size()}, {"records", records}};
  if (!lags.empty()) {
    const auto days = lag_days(lags);
    const EmpiricalCdf cdf(days);
    json points = json::array();
    const auto& sorted = cdf.sorted_values();
    for (std::size_t k = 0; k < sorted.size(); ++k)
      if (k + 1 == sorted.size() || sorted[k + 1] != sorted[k]) points.push_back({{"lag_days", sorted[k]}, {"cdf", cdf(sorted[k])}});
    double sum = 0;
    for (double d : days) sum += d;
    out["mean_days"] = sum / static_cast<double>(days.size());
    out["cdf"] = points;
  }
  return out;
}

json moderators_json(const ModeratorSplit& m) {
  auto names = [](const std::vector<InstanceRef>& v) {
    json a = json::array();
    for (const auto& i : v) a.push_back(i.domain());
    return a;
  };
  return {{"with_dedicated_moderators", names(m.with_dedicated_mods)},
          {"without", names(m.without)},
          {"with_footprint", footprint_json(m.with_footprint)},
          {"without_footprint", footprint_json(m.without_footprint)},
          {"with_lags", m.with_lags},
          {"without_lags", m.without_lags}};
}

std::string targets_csv(const TargetRanking& r) {
  std::ostringstream out;
  out << "group,rank,domain,instances_targeting\n";
  std::size_t rank = 0;
  for (const auto& [i, n] : r.top) out << "top," << ++rank << ',' << i.domain() << ',' << n << '\n';
  rank = 0;
  for (const auto& [i, n] : r.bottom) out << "bottom," << ++rank << ',' << i.domain() << ',' << n << '\n';
  return out.str();
}

json targets_json(const TargetRanking& r) {
  auto list = [](const auto& v) {
    json a = json::array();
    for (const auto& [i, n] : v) a.push_back({{"domain", i.domain()}, {"instances_targeting", n}});
    return a;
  };
  return {{"top", list(r.top)}, {"bottom", list(r.bottom)}};
}

// ------------------------------------------------------------ summary

json store_summary(const Store& store) {
  json s;
  s["instances"] = store.instances().size();
  s["snapshots"] = store.snapshots().size();
  s["edges"] = store.edges().size();
  s["posts"] = store.posts().size();
  const auto span = store.time_span();
  if (!span) return s;
  s["first_observation"] = span->first;
  s["last_observation"] = span->second;

  // Outcome of each instance's most recent attempt.
  std::map<InstanceRef, const InstanceSnapshot*> latest_attempt;
  for (const auto& snap : store.snapshots()) {
    auto& slot = latest_attempt[snap.instance];
    if (!slot || snap.observed_at >= slot->observed_at) slot = &snap;
  }
  std::map<std::string, std::size_t> outcomes;
  for (auto c : kAllFetchClasses) outcomes[std::string(to_string(c))] = 0;
  for (const auto& [_, snap] : latest_attempt) ++outcomes[std::string(to_string(snap->fetch_status.cls))];
  s["latest_fetch_outcomes"] = outcomes;

  const auto latest = latest_snapshots(store, span->second);
  std::size_t exposed = 0, defaults = 0;
  for (const auto* snap : latest) {
    if (!snap->policy_config.exposed) continue;
    ++exposed;
    defaults += default_only(snap->policy_config, snap->version);
  }
  s["exposed_instances"] = exposed;
  s["default_only_instances"] = defaults;
  s["default_only_share"] = exposed ? static_cast<double>(defaults) / static_cast<double>(exposed) : 0.0;

  std::size_t pre = 0;
  for (const auto& e : store.edges()) pre += e.pre_window;
  s["pre_window_edge_share"] = store.edges().empty() ? 0.0 : static_cast<double>(pre) / static_cast<double>(store.edges().size());

  const auto lags = response_lags(store);
  s["lag_records"] = lags.size();
  if (!lags.empty()) {
    const auto days = lag_days(lags);
    double sum = 0;
    for (double d : days) sum += d;
    s["mean_lag_days"] = sum / static_cast<double>(days.size());
  }
  try {
    s["posts_admins_spearman"] = posts_admins_spearman(store, span->second);
  } catch (const Error& e) {
    s["posts_admins_spearman"] = nullptr;
    spdlog::warn("spearman undefined: {}", e.what());
  }
  return s;
}

std::string summary_csv(const json& summary) {
  std::ostringstream out;
  out << "key,value\n";
  for (const auto& [k, v] : summary.items()) {
    if (v.is_object()) {
      for (const auto& [k2, v2] : v.items()) out << k << '.' << k2 << ',' << v2.dump() << '\n';
    } else {
      out << k << ',' << v.dump() << '\n';
    }
  }
  return out.str();
}

// ------------------------------------------------------------ commands

struct CrawlArgs {
  std::string store, config, mock_base_url, lexicon, report_out;
  std::vector<std::string> seeds;
  int cycles = 1;
  std::optional<Timestamp> at;
};

int do_crawl(const CrawlArgs& a) {
  CrawlConfig config;
  if (!a.config.empty()) config = read_json(a.config).get<CrawlConfig>();
  for (const auto& s : a.seeds) {
    if (!InstanceRef::is_valid_domain(s)) throw UsageError("invalid seed instance '" + s + "'");
    config.seed_instances.emplace_back(s);
  }
  if (!a.mock_base_url.empty()) config.mock_base_url = a.mock_base_url;
  config.validate();

  HateLexicon lexicon;
  if (!a.lexicon.empty()) {
    lexicon = HateLexicon::load(a.lexicon);
  } else {
    spdlog::warn("no --lexicon given; hate counts will be zero");
  }
  if (config.seed_instances.empty() && !fs::exists(fs::path(a.store) / "snapshots.ndjson"))
    throw UsageError("nothing to crawl: give --seed-instance or a config with seed_instances");
  auto store = Store::open(a.store);

  Crawler crawler(config, std::move(lexicon));
  std::string reports;
  for (int cycle = 0; cycle < a.cycles; ++cycle) {
    const Timestamp now = a.at ? *a.at + cycle * config.cadence_seconds : unix_now();
    const auto report = crawler.crawl_cycle(store, now);
    reports += json(report).dump() + "\n";
    if (!a.at && cycle + 1 < a.cycles) std::this_thread::sleep_for(std::chrono::seconds(config.cadence_seconds));
  }
  if (!a.report_out.empty()) write_text(a.report_out, reports);
  return kExitOk;
}

struct AnalyzeArgs {
  std::string store, out = ".", format = "csv";
  std::vector<std::string> reports;
  std::optional<Timestamp> at;
  int bucket_days = 30;
};

int do_analyze(const AnalyzeArgs& a) {
  const auto store = open_existing(a.store);
  const Timestamp at = a.at.value_or(last_observation(store));
  std::set<std::string> wanted(a.reports.begin(), a.reports.end());
  if (wanted.empty() || wanted.contains("all")) wanted = {"footprint", "growth", "admins", "lags", "moderators", "targets"};
  const bool csv = a.format == "csv";
  const fs::path dir(a.out);
  auto emit = [&](const std::string& name, const std::function<std::string()>& as_csv, const std::function<json()>& as_json) {
    if (!wanted.contains(name)) return;
    if (csv) {
      write_text(dir / (name == "moderators" ? "moderator_split.csv" : name + ".csv"), as_csv());
    } else {
      write_text(dir / (name == "moderators" ? "moderator_split.json" : name + ".json"), as_json().dump(2) + "\n");
    }
  };
  emit("footprint", [&] { return footprint_csv(policy_footprint(store, at)); },
       [&] { return footprint_json(policy_footprint(store, at)); });
  const Timestamp bucket = static_cast<Timestamp>(a.bucket_days) * kSecondsPerDay;
  emit("growth", [&] { return growth_csv(policy_growth_series(store, bucket)); },
       [&] { return growth_json(policy_growth_series(store, bucket)); });
  emit("admins", [&] { return admins_csv(admin_distribution(store, at)); },
       [&] { return admins_json(admin_distribution(store, at)); });
  emit("lags", [&] { return lags_csv(response_lags(store)); }, [&] { return lags_json(response_lags(store)); });
  emit("moderators", [&] { return moderator_split_csv(moderator_split(store, at)); },
       [&] { return moderators_json(moderator_split(store, at)); });
  emit("targets", [&] { return targets_csv(rank_targets(store)); }, [&] { return targets_json(rank_targets(store)); });
  return kExitOk;
}

struct FeaturesArgs {
  std::string store, out, lambdas_out;
  std::optional<Timestamp> begin, end;
};

int do_features(const FeaturesArgs& a) {
  const auto store = open_existing(a.store);
  const auto obs = Observation::of(store);
  const TimeWindow window{a.begin.value_or(obs.start), a.end.value_or(obs.full().end)};
  if (window.end <= window.begin) throw UsageError("--end must be after --begin");

  const FeatureExtractor fx(store);
  std::vector<std::pair<InstanceRef, FeatureVector>> rows;
  for (const auto& inst : store.instances())
    if (fx.has_snapshot_in(inst, window)) rows.emplace_back(inst, fx.extract(inst, window));
  if (rows.empty()) throw Error("no instance has a successful snapshot in the window");
  std::vector<FeatureVector> raw;
  for (const auto& [_, fv] : rows) raw.push_back(fv);
  const auto lambdas = BoxCoxLambdas::fit(raw);
  for (auto& [_, fv] : rows) lambdas.apply(fv);

  write_text(a.out, feature_table_csv(rows));
  if (!a.lambdas_out.empty()) write_text(a.lambdas_out, json(lambdas).dump(2) + "\n");
  spdlog::info("{} instances, window [{}, {})", rows.size(), window.begin, window.end);
  return kExitOk;
}

struct TrainArgs {
  std::string store, task, family, out, grid;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  bool ablate_posts = false;
  double large_posts = 600;
  int train_months = 8;
};

json experiment_json(const Experiment& e) {
  json cv = json::array();
  for (const auto& r : e.model.cv) cv.push_back({{"params", r.params}, {"mean_f1", r.mean_f1}});
  return {{"test", e.test},
          {"train_rows", e.train_rows},
          {"test_rows", e.test_rows},
          {"test_positives", e.test_positives},
          {"params", e.model.params},
          {"cv", cv}};
}

std::string importance_csv(const TrainedModel& model) {
  std::ostringstream out;
  out << "rank,feature,weight\n";
  std::size_t rank = 0;
  for (const auto& [name, w] : feature_importance(model)) out << ++rank << ',' << name << ',' << csv_number(w) << '\n';
  return out.str();
}

int do_train(const TrainArgs& a) {
  if (a.ablate_posts && a.task != "global") throw UsageError("--ablate-posts applies to --task global only");
  if (!(a.train_fraction > 0 && a.train_fraction < 1)) throw UsageError("--train-fraction must lie in (0, 1)");
  const Family family = family_from_string(a.family);
  HyperGrid grid = HyperGrid::standard(family);
  if (!a.grid.empty()) {
    json subset;
    try {
      subset = json::parse(a.grid);
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("--grid is not valid JSON: ") + e.what());
    }
    try {
      grid = HyperGrid::restricted(family, subset);
    } catch (const Error& e) {
      throw UsageError(std::string("--grid: ") + e.what());
    }
  }
  const auto store = open_existing(a.store);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  json metrics = {{"task", a.task}, {"family", std::string(to_string(family))}, {"seed", a.seed}};

  if (a.task == "global") {
    auto data = build_global_dataset(store, a.train_fraction, a.seed);
    if (a.ablate_posts) {
      data.train = ablate_post_features(data.train);
      data.test = ablate_post_features(data.test);
    }
    const auto e = run_experiment(family, data, grid, a.seed);
    metrics.update(experiment_json(e));
    metrics["ablate_posts"] = a.ablate_posts;
    e.model.save(dir / "model.json");
    if (family != Family::mlp) write_text(dir / "importance.csv", importance_csv(e.model));
  } else if (a.task == "window") {
    const auto plan = build_window_datasets(store, a.train_fraction, a.seed);
    for (const auto& w : plan.warnings) spdlog::warn("{}", w);
    const auto results = run_window_experiments(family, plan, grid, a.seed);
    std::ostringstream csv;
    csv << "month,f1,precision,recall,accuracy,train_rows,test_rows,test_positives\n";
    json windows = json::array();
    for (const auto& r : results) {
      const auto& t = r.experiment.test;
      csv << r.month << ',' << csv_number(t.f1) << ',' << csv_number(t.precision) << ',' << csv_number(t.recall) << ','
          << csv_number(t.accuracy) << ',' << r.experiment.train_rows << ',' << r.experiment.test_rows << ','
          << r.experiment.test_positives << '\n';
      json w = experiment_json(r.experiment);
      w["month"] = r.month;
      windows.push_back(w);
    }
    metrics["windows"] = windows;
    metrics["warnings"] = plan.warnings;
    write_text(dir / "windows.csv", csv.str());
  } else if (a.task == "local") {
    LocalOptions options;
    options.train_months = a.train_months;
    options.train_fraction = a.train_fraction;
    const auto summary = run_local_experiments(store, family, grid, a.seed, a.large_posts, options);
    std::ostringstream csv;
    csv << "domain,posts,large,rows,positives,f1,skipped\n";
    for (const auto& r : summary.results) {
      csv << r.instance.domain() << ',' << r.posts << ',' << (r.large ? 1 : 0) << ',' << r.rows << ',' << r.positives
          << ',' << (r.f1 ? csv_number(*r.f1) : "") << ',' << r.skipped << '\n';
    }
    metrics["mean_f1"] = summary.mean_f1;
    metrics["large_mean_f1"] = summary.large_mean_f1;
    metrics["small_mean_f1"] = summary.small_mean_f1;
    metrics["evaluated"] = summary.evaluated;
    metrics["large_evaluated"] = summary.large_evaluated;
    metrics["small_evaluated"] = summary.small_evaluated;
    metrics["large_instance_posts"] = a.large_posts;
    write_text(dir / "local.csv", csv.str());
  }
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  return kExitOk;
}

struct PredictArgs {
  std::string model, store, out;
  double threshold = ml::kDecisionThreshold;
  std::optional<std::size_t> top_k;
};

int do_predict(const PredictArgs& a) {
  if (!(a.threshold >= 0 && a.threshold <= 1)) throw UsageError("--threshold must lie in [0, 1]");
  const auto model = TrainedModel::load(a.model);
  const auto store = open_existing(a.store);
  const auto candidates = candidate_rows(store, model);
  const auto entries = generate_watchlist(model, candidates, a.threshold, a.top_k);
  write_text(a.out, watchlist_json(entries).dump(2) + "\n");
  spdlog::info("{} of {} candidates on the watchlist", entries.size(), candidates.rows());
  return kExitOk;
}

struct SynthArgs {
  std::string params, out;
  std::optional<std::uint64_t> seed;
};

int do_synth(const SynthArgs& a) {
  CorpusParams params;
  if (!a.params.empty()) params = read_json(a.params).get<CorpusParams>();
  if (a.seed) params.seed = *a.seed;
  params.validate();
  const auto manifest = write_corpus(params, a.out);
  std::size_t labeled = 0;
  for (const auto& i : manifest.instances) labeled += i.label;
  spdlog::info("synthetic corpus: {} instances, {} targeted, {} planted policies", manifest.instances.size(), labeled,
               manifest.policies.size());
  return kExitOk;
}

struct ReportArgs {
  std::string store, out, format = "json";
};

int do_report(const ReportArgs& a) {
  const auto store = open_existing(a.store);
  const auto summary = store_summary(store);
  write_text(a.out, a.format == "json" ? summary.dump(2) + "\n" : summary_csv(summary));
  return kExitOk;
}

Timestamp parse_timestamp(const std::string& text) {
  if (auto t = parse_iso8601(text)) return *t;
  std::size_t used = 0;
  try {
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("'" + text + "' is neither Unix seconds nor an ISO-8601 UTC time");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moderation-policy measurement and watchlist toolkit for Pleroma instances", "fedwatch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fedwatch 0.1.0");

  CrawlArgs crawl;
  std::string crawl_at;
  auto* c = app.add_subcommand("crawl", "Crawl instances into a store");
  c->add_option("--store", crawl.store, "Store directory")->required();
  c->add_option("--config", crawl.config, "Crawl config JSON")->check(CLI::ExistingFile);
  c->add_option("--seed-instance", crawl.seeds, "Seed domain (repeatable)");
  c->add_option("--mock-base-url", crawl.mock_base_url, "Send all requests to this fixture server");
  c->add_option("--lexicon", crawl.lexicon, "Hate lexicon, one term per line")->check(CLI::ExistingFile);
  c->add_option("--cycles", crawl.cycles, "Crawl cycles to run")->check(CLI::PositiveNumber);
  c->add_option("--at", crawl_at, "Simulated clock for the first cycle (no sleeping between cycles)");
  c->add_option("--report-out", crawl.report_out, "Write cycle reports here as JSON lines");

  AnalyzeArgs analyze;
  std::string analyze_at;
  auto* an = app.add_subcommand("analyze", "Write measurement tables");
  an->add_option("--store", analyze.store, "Store directory")->required();
  an->add_option("--report", analyze.reports, "footprint|growth|admins|lags|moderators|targets|all (repeatable)")
      ->check(CLI::IsMember({"footprint", "growth", "admins", "lags", "moderators", "targets", "all"}));
  an->add_option("--out", analyze.out, "Output directory");
  an->add_option("--format", analyze.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  an->add_option("--at", analyze_at, "Evaluate cross-sections at this time (default: last observation)");
  an->add_option("--bucket-days", analyze.bucket_days, "Growth bucket width in days")->check(CLI::PositiveNumber);

  FeaturesArgs features;
  std::string f_begin, f_end;
  auto* f = app.add_subcommand("features", "Write the 38-feature table");
  f->add_option("--store", features.store, "Store directory")->required();
  f->add_option("--out", features.out, "Output CSV")->required();
  f->add_option("--begin", f_begin, "Window start (default: first observation)");
  f->add_option("--end", f_end, "Window end, exclusive (default: end of the last observed month)");
  f->add_option("--lambdas-out", features.lambdas_out, "Also write the fitted Box-Cox lambdas");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train and evaluate a watchlist model");
  t->add_option("--store", train.store, "Store directory")->required();
  t->add_option("--task", train.task, "global, window or local")->required()->check(CLI::IsMember({"global", "window", "local"}));
  t->add_option("--family", train.family, "lr, mlp, rf or gbt")->required()->check(CLI::IsMember({"lr", "mlp", "rf", "gbt"}));
  t->add_option("--seed", train.seed, "Random seed");
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--train-fraction", train.train_fraction, "Share of instances used for training");
  t->add_option("--grid", train.grid, "JSON object narrowing the search grid, e.g. {\"max_depth\":[8]}");
  t->add_flag("--ablate-posts", train.ablate_posts, "Drop posts and posts_tr (global task)");
  t->add_option("--large-posts", train.large_posts, "Local task: size threshold in local posts");
  t->add_option("--train-months", train.train_months, "Local task: months per side")->check(CLI::PositiveNumber);

  PredictArgs predict;
  std::size_t top_k = 0;
  auto* p = app.add_subcommand("predict", "Score instances and write a watchlist");
  p->add_option("--model", predict.model, "Model file from train")->required()->check(CLI::ExistingFile);
  p->add_option("--store", predict.store, "Store directory")->required();
  p->add_option("--out", predict.out, "Watchlist JSON")->required();
  p->add_option("--threshold", predict.threshold, "Minimum score");
  auto* top_k_opt = p->add_option("--top-k", top_k, "Keep the k best instead of thresholding")->check(CLI::PositiveNumber);

  SynthArgs synth;
  std::uint64_t synth_seed = 0;
  auto* s = app.add_subcommand("synth", "Generate a synthetic store with planted ground truth");
  s->add_option("--params", synth.params, "Generator parameters JSON")->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Store directory to create")->required();
  auto* seed_opt = s->add_option("--seed", synth_seed, "Overrides the seed in --params");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Summarize a store");
  r->add_option("--store", report.store, "Store directory")->required();
  r->add_option("--out", report.out, "Output file")->required();
  r->add_option("--format", report.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (*c) {
      if (!crawl_at.empty()) crawl.at = parse_timestamp(crawl_at);
      return do_crawl(crawl);
    }
    if (*an) {
      if (!analyze_at.empty()) analyze.at = parse_timestamp(analyze_at);
      return do_analyze(analyze);
    }
    if (*f) {
      if (!f_begin.empty()) features.begin = parse_timestamp(f_begin);
      if (!f_end.empty()) features.end = parse_timestamp(f_end);
      return do_features(features);
    }
    if (*t) return do_train(train);
    if (*p) {
      if (*top_k_opt) predict.top_k = top_k;
      return do_predict(predict);
    }
    if (*s) {
      if (*seed_opt) synth.seed = synth_seed;
      return do_synth(synth);
    }
    if (*r) return do_report(report);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace fedwatch::cli
