#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedwatch/features.hpp"
#include "fedwatch/learners.hpp"
#include "fedwatch/store.hpp"

namespace fedwatch {

inline constexpr Timestamp kMonthSeconds = 30 * kSecondsPerDay;
inline constexpr int kMaxWindowMonths = 9;

/// Month grid of a store: 30-day blocks from the first observation.
struct Observation {
  Timestamp start = 0;
  int months = 0;  // blocks touched by at least one snapshot

  Timestamp month_end(int m) const { return start + static_cast<Timestamp>(m) * kMonthSeconds; }
  TimeWindow full() const { return {start, month_end(months)}; }
  static Observation of(const Store& store);  // throws Error on an empty store
};

struct LabeledInstance {
  InstanceRef instance;
  int label = 0;

  bool operator==(const LabeledInstance&) const = default;
};

/// Every instance whose latest snapshot in `window` exposes its policies,
/// labeled 1 iff another instance listed it as a simple-policy target in
/// some snapshot inside the window. Sorted by domain.
std::vector<LabeledInstance> label_instances(const Store& store, const TimeWindow& window);

/// Peers of `source` first seen before the window ends, labeled 1 iff
/// `source` itself lists the peer as a target in a snapshot inside `window`.
std::vector<LabeledInstance> label_peers(const Store& store, const InstanceRef& source, const TimeWindow& window);

/// Header of the selected feature columns.
std::vector<std::string> selected_header();

/// One row per instance; the *_tr columns use `lambdas`. Instances without a
/// snapshot inside the window are skipped.
Dataset feature_rows(const FeatureExtractor& fx, const std::vector<LabeledInstance>& rows, const TimeWindow& window,
                     const BoxCoxLambdas& lambdas);

struct SplitDatasets {
  Dataset train;
  Dataset test;
  BoxCoxLambdas lambdas;
  TimeWindow train_window;
  TimeWindow test_window;
};

/// Stratified split of labeled instances over the full observation, with
/// Box-Cox lambdas fitted on the training part. Throws Error when a class
/// has fewer than 10 members.
SplitDatasets build_global_dataset(const Store& store, double train_fraction, std::uint64_t seed);

struct WindowDatasets {
  int month = 0;
  SplitDatasets data;
};

struct WindowPlan {
  std::vector<WindowDatasets> windows;
  std::vector<std::string> warnings;
};

/// For m = 1..9: training instances use features and labels from months
/// [1, m]; test instances use features from months (m, M] and labels from
/// the whole observation of M months. The last month is never a training
/// month. Instances are split once, stratified by final label. Fewer
/// available months truncate the list and add a warning.
WindowPlan build_window_datasets(const Store& store, double train_fraction, std::uint64_t seed);

struct LocalDatasets {
  InstanceRef instance;
  Dataset train;
  Dataset test;
};

struct LocalOptions {
  int train_months = 8;
  double train_fraction = 0.8;
};

/// Rows are the peers of `instance`, labeled by the instance's own
/// simple-policy targets. Peers are split by stratified sampling on the
/// final label. Training rows take features and labels from the first
/// `train_months` months; test rows take features from the last
/// `train_months` months and labels from the whole observation, so both
/// sides aggregate the same number of months. Throws Error when the
/// instance has no peers or the training part is single-class.
LocalDatasets build_local_dataset(const Store& store, const FeatureExtractor& fx, const InstanceRef& instance,
                                  const LocalOptions& options, std::uint64_t seed);

/// Drops the posts and posts_tr columns. Throws Error when either is absent.
Dataset ablate_post_features(const Dataset& data);

// ---------------------------------------------------------------- experiments

struct Experiment {
  TrainedModel model;
  EvalMetrics test;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t test_positives = 0;
};

/// Grid search on train, evaluation on test. Box-Cox lambdas are stored in
/// the model metadata so that the model can score new instances.
Experiment run_experiment(Family family, const SplitDatasets& data, const HyperGrid& grid, std::uint64_t seed);

struct WindowResult {
  int month = 0;
  Experiment experiment;
};

std::vector<WindowResult> run_window_experiments(Family family, const WindowPlan& plan, const HyperGrid& grid,
                                                 std::uint64_t seed);

struct LocalResult {
  InstanceRef instance;
  std::int64_t posts = 0;  // the instance's own local posts over the observation
  bool large = false;
  std::size_t rows = 0;
  std::size_t positives = 0;
  std::optional<double> f1;  // unset when skipped
  std::string skipped;       // reason, when skipped
};

struct LocalSummary {
  std::vector<LocalResult> results;
  double mean_f1 = 0;
  double large_mean_f1 = 0;
  double small_mean_f1 = 0;
  std::size_t evaluated = 0;
  std::size_t large_evaluated = 0;
  std::size_t small_evaluated = 0;
};

/// One model per exposed instance. Instances are skipped (with a reason)
/// when they have no peers, a single-class training part, no test positives
/// or fewer than two training rows of the minority class. CV uses
/// min(5, minority count) folds.
LocalSummary run_local_experiments(const Store& store, Family family, const HyperGrid& grid, std::uint64_t seed,
                                   double large_instance_posts, const LocalOptions& options = {});

// ---------------------------------------------------------------- watchlist

struct WatchlistEntry {
  InstanceRef instance;
  double score = 0;
  std::size_t rank = 0;
  std::vector<std::string> top_features;  // empty for non-explainable families

  bool operator==(const WatchlistEntry&) const = default;
};

/// Candidate rows over the store's full observation using the lambdas kept
/// in the model metadata; labels are unknown and set to 0.
Dataset candidate_rows(const Store& store, const TrainedModel& model);

/// Entries with score >= threshold, or the top_k best when given, ranked by
/// (score desc, domain asc). Linear models explain each entry by its largest
/// |coefficient * standardized value| terms; tree ensembles by their
/// overall importance ranking.
std::vector<WatchlistEntry> generate_watchlist(const TrainedModel& model, const Dataset& candidates,
                                               double threshold = ml::kDecisionThreshold,
                                               std::optional<std::size_t> top_k = std::nullopt);

/// JSON array of {domain, score, rank, features?}.
nlohmann::json watchlist_json(const std::vector<WatchlistEntry>& entries);

void to_json(nlohmann::json& j, const BoxCoxLambdas& l);
void from_json(const nlohmann::json& j, BoxCoxLambdas& l);

}  // namespace fedwatch
