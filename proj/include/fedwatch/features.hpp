#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedwatch/store.hpp"
#include "fedwatch/types.hpp"

namespace fedwatch {

/// The 38 per-instance features. The first 16 form the selected subset.
enum class Feature : std::size_t {
  users,
  posts,
  hate_count,
  url_count,
  reject,
  nsfw,
  media_removal,
  federated_timeline_removal,
  posts_tr,
  reject_deletes,
  quaran_inst,
  mentions_count,
  hate_avg,
  url_avg,
  hashtags_avg,
  mentions_avg,
  hashtags_count,
  hate_percent,
  url_percent,
  hashtags_percent,
  mentions_percent,
  followers,
  following,
  reblogs_count,
  replies_count,
  users_tr,
  hate_tr,
  url_tr,
  accept,
  report_removal,
  avatar_removal,
  banner_removal,
  followers_only,
  active_halfyear,
  active_month,
  hash_ftr,
  hash_rej,
  hash_sen,
};

inline constexpr std::size_t kFeatureCount = 38;
inline constexpr std::size_t kSelectedFeatureCount = 16;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "users",          "posts",          "hate_count",       "url_count",
    "reject",         "nsfw",           "media_removal",    "federated_timeline_removal",
    "posts_tr",       "reject_deletes", "quaran_inst",      "mentions_count",
    "hate_avg",       "url_avg",        "hashtags_avg",     "mentions_avg",
    "hashtags_count", "hate_percent",   "url_percent",      "hashtags_percent",
    "mentions_percent", "followers",    "following",        "reblogs_count",
    "replies_count",  "users_tr",       "hate_tr",          "url_tr",
    "accept",         "report_removal", "avatar_removal",   "banner_removal",
    "followers_only", "active_halfyear", "active_month",    "hash_ftr",
    "hash_rej",       "hash_sen",
};

static_assert(static_cast<std::size_t>(Feature::hash_sen) + 1 == kFeatureCount);
static_assert(static_cast<std::size_t>(Feature::mentions_avg) + 1 == kSelectedFeatureCount);

namespace detail {
consteval bool feature_names_unique() {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i)
    for (std::size_t j = i + 1; j < kFeatureNames.size(); ++j)
      if (kFeatureNames[i] == kFeatureNames[j]) return false;
  return true;
}
}  // namespace detail
static_assert(detail::feature_names_unique());

constexpr std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }
std::optional<Feature> feature_from_name(std::string_view name);

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }

  bool operator==(const FeatureVector&) const = default;
};

struct SelectedFeatures {
  std::array<double, kSelectedFeatureCount> values{};

  static std::array<std::string_view, kSelectedFeatureCount> names();
};

SelectedFeatures select_features(const FeatureVector& fv);

/// Half-open [begin, end) interval of Unix seconds.
struct TimeWindow {
  Timestamp begin = 0;
  Timestamp end = 0;

  bool contains(Timestamp t) const { return t >= begin && t < end; }
};

/// Per-feature Box-Cox lambdas for the four *_tr columns, fitted on
/// count + 1 of the training rows.
struct BoxCoxLambdas {
  double posts = 1.0;
  double users = 1.0;
  double hate_count = 1.0;
  double url_count = 1.0;

  /// Constant training columns are not identifiable; they keep lambda = 1.
  static BoxCoxLambdas fit(const std::vector<FeatureVector>& train);
  void apply(FeatureVector& fv) const;

  bool operator==(const BoxCoxLambdas&) const = default;
};

/// Indexes a store once so that many (instance, window) extractions are
/// cheap. Holds a reference; the store must outlive it.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const Store& store);

  /// Throws Error when the instance has no successful snapshot in the window.
  /// The *_tr features are filled only when lambdas are given.
  FeatureVector extract(const InstanceRef& instance, const TimeWindow& window,
                        const BoxCoxLambdas* lambdas = nullptr) const;

  bool has_snapshot_in(const InstanceRef& instance, const TimeWindow& window) const;
  /// Latest successful snapshot inside the window, if any.
  const InstanceSnapshot* snapshot_in(const InstanceRef& instance, const TimeWindow& window) const;

 private:
  const Store& store_;
  std::map<InstanceRef, std::vector<std::size_t>> snapshots_;  // ok snapshots, by time
  std::map<InstanceRef, std::vector<std::size_t>> posts_;      // by created_at
};

FeatureVector extract_features(const Store& store, const InstanceRef& instance, const TimeWindow& window,
                               const BoxCoxLambdas* lambdas = nullptr);

/// Header `domain` then the 38 feature names; one row per instance, values
/// printed with up to 17 significant digits.
std::string feature_table_csv(const std::vector<std::pair<InstanceRef, FeatureVector>>& rows);

}  // namespace fedwatch
