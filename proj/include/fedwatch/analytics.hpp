#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedwatch/stats.hpp"
#include "fedwatch/store.hpp"
#include "fedwatch/types.hpp"

namespace fedwatch {

inline constexpr const char* kOthersSeries = "Others";

/// Policies an instance counts as using. Enabled policies count as applied,
/// except SimplePolicy (needs at least one target) and NoOpPolicy (only
/// when it is the sole enabled policy).
std::set<std::string> applied_policies(const PolicyConfig& config);

/// Latest successful snapshot of each instance with observed_at <= at,
/// sorted by domain.
std::vector<const InstanceSnapshot*> latest_snapshots(const Store& store, Timestamp at);

struct FootprintRow {
  std::string policy;
  double pct_instances = 0;  // fractions in [0, 1]
  double pct_users = 0;
  double pct_posts = 0;
  std::size_t instances = 0;

  bool operator==(const FootprintRow&) const = default;
};

/// Footprint over the given snapshots; unexposed configs are skipped.
/// Sorted by pct_instances descending, then policy name.
std::vector<FootprintRow> footprint_of(const std::vector<const InstanceSnapshot*>& snapshots);

/// Throws Error when no snapshot exists at or before `at`.
std::vector<FootprintRow> policy_footprint(const Store& store, Timestamp at);

struct GrowthSeries {
  std::vector<Timestamp> times;            // end of each bucket
  std::vector<std::string> names;          // top five policies, then "Others"
  std::vector<std::vector<double>> pct;    // [series][bucket] share of exposed instances
  std::vector<std::int64_t> total_policies;  // applied (instance, policy) pairs per bucket
  std::vector<std::size_t> exposed_instances;
};

/// Buckets of `bucket` seconds from the first observation. Each bucket is
/// evaluated on the latest snapshots up to its end. The top five policies
/// are chosen by footprint in the final bucket; "Others" is the share of
/// instances applying at least one other policy.
GrowthSeries policy_growth_series(const Store& store, Timestamp bucket);

struct AdminHistogram {
  std::map<std::size_t, std::size_t> counts;  // admins per instance -> instances
  std::size_t total = 0;

  std::map<std::size_t, double> fractions() const;
};

/// Instances that publish staff with at least one administrator.
AdminHistogram admin_distribution(const Store& store, Timestamp at);

/// Spearman correlation of local post count against administrator count
/// over staff-exposing instances.
double posts_admins_spearman(const Store& store, Timestamp at);

struct LagRecord {
  InstanceRef source;
  InstanceRef target;
  Timestamp federated_at = 0;
  Timestamp policy_at = 0;
  double lag_days = 0;

  bool operator==(const LagRecord&) const = default;
};

/// One record per non-pre-window edge whose target later appears in the
/// source's simple-policy targets. The policy date is the first snapshot
/// listing the target; a policy already listed before the edge was seen
/// yields no record. Sorted by (source, target).
std::vector<LagRecord> response_lags(const Store& store,
                                     const std::optional<std::set<InstanceRef>>& targets = std::nullopt);

EmpiricalCdf empirical_cdf(const std::vector<double>& values);
std::vector<double> lag_days(const std::vector<LagRecord>& lags);

/// Instances ranked by the number of distinct instances targeting them at
/// the end of the observation; ties are broken by domain.
struct TargetRanking {
  std::vector<std::pair<InstanceRef, std::size_t>> top;
  std::vector<std::pair<InstanceRef, std::size_t>> bottom;
};
TargetRanking rank_targets(const Store& store, std::size_t k = 10);

/// True iff some moderator is not also an administrator.
bool has_dedicated_moderators(const InstanceSnapshot& snapshot);

struct ModeratorSplit {
  std::vector<InstanceRef> with_dedicated_mods;
  std::vector<InstanceRef> without;
  std::vector<FootprintRow> with_footprint;  // restricted to the overall top 15 policies
  std::vector<FootprintRow> without_footprint;
  std::vector<double> with_lags;  // days, lags whose source is in the group
  std::vector<double> without_lags;
};

ModeratorSplit moderator_split(const Store& store, Timestamp at);

// CSV renderers; each starts with a header row.
std::string footprint_csv(const std::vector<FootprintRow>& rows);
std::string growth_csv(const GrowthSeries& series);
std::string admins_csv(const AdminHistogram& histogram);
std::string lags_csv(const std::vector<LagRecord>& lags);
std::string moderator_split_csv(const ModeratorSplit& split);

}  // namespace fedwatch
