#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedwatch/store.hpp"
#include "fedwatch/types.hpp"

namespace fedwatch {

/// Generator settings. Rates are per post (Poisson means); ranges are
/// sampled uniformly per instance.
struct CorpusParams {
  std::uint64_t seed = 1;
  std::int64_t n_instances = 200;
  int months = 10;
  int month_days = 30;
  Timestamp start = 1608076800;  // 2020-12-16T00:00:00Z
  Timestamp cadence_seconds = kSecondsPerDay;

  // Volumes: log-normal totals over the whole observation.
  double log_posts_mu = 5.5;
  double log_posts_sigma = 1.0;
  double log_users_mu = 3.0;
  double log_users_sigma = 0.9;
  double users_posts_coupling = 0.3;  // weight of the post-volume draw in log users

  double controversial_fraction = 0.2;
  double hate_rate_benign_max = 0.02;
  double hate_rate_controversial_min = 0.15;
  double hate_rate_controversial_max = 0.5;
  double mention_rate_benign_min = 0.2;
  double mention_rate_benign_max = 0.8;
  double mention_rate_controversial_min = 1.5;
  double mention_rate_controversial_max = 3.0;

  // Who gets targeted. "controversy": visible controversial instances;
  // "volume": any instance at or above volume_threshold_posts; "mixed": both.
  std::string label_driver = "mixed";
  double visibility_posts = 150;
  double volume_threshold_posts = 400;
  double large_instance_posts = 600;

  // Responding instance i targets a qualifying peer with probability
  // interpolated by i's size rank between these two values.
  double response_prob_small = 0.3;
  double response_prob_large = 0.95;
  double noise_target_prob = 0.0003;
  double delay_mean_days = 82.3;
  double delay_shape = 6.0;  // gamma shape; the mean is delay_mean_days

  double peer_prob_min = 0.25;
  double peer_prob_max = 0.9;
  double pre_window_edge_fraction = 0.55;
  double pre_window_policy_fraction = 0.5;

  double unexposed_fraction = 0.1;
  double staff_hidden_fraction = 0.1;
  std::map<std::size_t, double> admin_weights{{1, 0.7}, {2, 0.2}, {3, 0.07}, {4, 0.03}};
  double moderator_fraction = 0.12;
  double dedicated_moderator_fraction = 0.3;

  double policy_growth = 0.4;  // final / initial applied-policy total = 1 + growth

  int text_samples = 100;
  std::vector<std::string> text_hate_terms{"slur01", "slur02", "slur03", "slur04", "slur05", "hate phrase01"};

  /// Throws ValidationError on degenerate settings.
  void validate() const;
  Timestamp span_seconds() const { return static_cast<Timestamp>(months) * month_days * kSecondsPerDay; }
};

void to_json(nlohmann::json& j, const CorpusParams& p);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, CorpusParams& p);

struct InstanceTotals {
  std::int64_t posts = 0, hate = 0, urls = 0, mentions = 0, hashtags = 0, reblogs = 0, replies = 0;
  std::int64_t with_hate = 0, with_url = 0, with_hashtag = 0, with_mention = 0;
};

struct PlantedInstance {
  InstanceRef instance;
  bool controversial = false;
  std::string kind;  // "hate", "mention" or "benign"
  bool visible = false;
  bool exposed = true;
  bool staff_exposed = true;
  std::size_t admins = 0;
  std::int64_t users = 0;
  double size_rank = 0;  // 0 = fewest posts, 1 = most
  InstanceTotals totals;
  bool label = false;  // targeted by some other instance by the end
};

struct PlantedPolicy {
  InstanceRef source;
  InstanceRef target;
  PolicyAction action = PolicyAction::reject;
  Timestamp federated_at = 0;  // first snapshot listing the peer
  Timestamp policy_at = 0;     // first snapshot listing the target
  double delay_days = 0;       // sampled delay (0 for pre-window pairs)
  bool pre_window = false;
};

struct TextSample {
  std::string content;
  std::int64_t mentions = 0, hashtags = 0, urls = 0, hate_hits = 0;
};

struct CorpusManifest {
  CorpusParams params;
  Timestamp start = 0;
  Timestamp end = 0;  // exclusive
  std::vector<PlantedInstance> instances;
  std::vector<PlantedPolicy> policies;
  double planted_delay_mean_days = 0;  // over non-pre-window policies
  std::map<std::size_t, std::size_t> admin_histogram;
  std::int64_t initial_total_policies = 0;
  std::int64_t final_total_policies = 0;
  std::vector<TextSample> text_samples;

  const PlantedInstance& instance(const InstanceRef& ref) const;
};

void to_json(nlohmann::json& j, const CorpusManifest& m);

/// Fills `store` (which should be empty) with a deterministic synthetic
/// world and returns its ground truth.
CorpusManifest generate_corpus(const CorpusParams& params, Store& store);

/// Writes a persistent store plus manifest.json and text_samples.jsonl
/// under `out_dir`. Throws Error when the directory already holds a store.
CorpusManifest write_corpus(const CorpusParams& params, const std::filesystem::path& out_dir);

}  // namespace fedwatch
