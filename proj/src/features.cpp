#include "fedwatch/features.hpp"

#include <algorithm>
#include <sstream>

#include "fedwatch/stats.hpp"

namespace fedwatch {

std::optional<Feature> feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i) {
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  }
  return std::nullopt;
}

std::array<std::string_view, kSelectedFeatureCount> SelectedFeatures::names() {
  std::array<std::string_view, kSelectedFeatureCount> out{};
  std::copy_n(kFeatureNames.begin(), kSelectedFeatureCount, out.begin());
  return out;
}

SelectedFeatures select_features(const FeatureVector& fv) {
  SelectedFeatures s;
  std::copy_n(fv.values.begin(), kSelectedFeatureCount, s.values.begin());
  return s;
}

namespace {

double fit_shifted(const std::vector<FeatureVector>& rows, Feature f) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r[f] + 1.0);
  try {
    return fit_box_cox(v);
  } catch (const UndefinedStatistic&) {
    return 1.0;
  }
}

}  // namespace

BoxCoxLambdas BoxCoxLambdas::fit(const std::vector<FeatureVector>& train) {
  BoxCoxLambdas l;
  if (train.empty()) return l;
  l.posts = fit_shifted(train, Feature::posts);
  l.users = fit_shifted(train, Feature::users);
  l.hate_count = fit_shifted(train, Feature::hate_count);
  l.url_count = fit_shifted(train, Feature::url_count);
  return l;
}

void BoxCoxLambdas::apply(FeatureVector& fv) const {
  fv[Feature::posts_tr] = box_cox(fv[Feature::posts] + 1.0, posts);
  fv[Feature::users_tr] = box_cox(fv[Feature::users] + 1.0, users);
  fv[Feature::hate_tr] = box_cox(fv[Feature::hate_count] + 1.0, hate_count);
  fv[Feature::url_tr] = box_cox(fv[Feature::url_count] + 1.0, url_count);
}

FeatureExtractor::FeatureExtractor(const Store& store) : store_(store) {
  const auto& snaps = store.snapshots();
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    if (snaps[i].fetch_status.ok()) snapshots_[snaps[i].instance].push_back(i);
  }
  for (auto& [_, idx] : snapshots_) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return snaps[a].observed_at < snaps[b].observed_at; });
  }
  const auto& posts = store.posts();
  for (std::size_t i = 0; i < posts.size(); ++i) posts_[posts[i].instance].push_back(i);
  for (auto& [_, idx] : posts_) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return posts[a].created_at < posts[b].created_at; });
  }
}

const InstanceSnapshot* FeatureExtractor::snapshot_in(const InstanceRef& instance,
                                                      const TimeWindow& window) const {
  auto it = snapshots_.find(instance);
  if (it == snapshots_.end()) return nullptr;
  const auto& snaps = store_.snapshots();
  const auto& idx = it->second;
  // last snapshot with observed_at < window.end
  auto pos = std::partition_point(idx.begin(), idx.end(),
                                  [&](std::size_t i) { return snaps[i].observed_at < window.end; });
  if (pos == idx.begin()) return nullptr;
  const auto& s = snaps[*std::prev(pos)];
  return window.contains(s.observed_at) ? &s : nullptr;
}

bool FeatureExtractor::has_snapshot_in(const InstanceRef& instance, const TimeWindow& window) const {
  return snapshot_in(instance, window) != nullptr;
}

FeatureVector FeatureExtractor::extract(const InstanceRef& instance, const TimeWindow& window,
                                        const BoxCoxLambdas* lambdas) const {
  const InstanceSnapshot* snap = snapshot_in(instance, window);
  if (!snap) throw Error("no snapshot for " + instance.domain() + " in window");

  FeatureVector fv;
  using F = Feature;
  fv[F::users] = static_cast<double>(snap->user_count);
  fv[F::active_month] = static_cast<double>(snap->active_month);
  fv[F::active_halfyear] = static_cast<double>(snap->active_halfyear);
  fv[F::followers] = static_cast<double>(snap->followers);
  fv[F::following] = static_cast<double>(snap->following);

  const auto& pc = snap->policy_config;
  auto targets = [&](PolicyAction a) { return static_cast<double>(pc.count_targets(a)); };
  fv[F::reject] = targets(PolicyAction::reject);
  fv[F::accept] = targets(PolicyAction::accept);
  fv[F::nsfw] = targets(PolicyAction::nsfw);
  fv[F::media_removal] = targets(PolicyAction::media_removal);
  fv[F::federated_timeline_removal] = targets(PolicyAction::federated_timeline_removal);
  fv[F::reject_deletes] = targets(PolicyAction::reject_deletes);
  fv[F::quaran_inst] = targets(PolicyAction::quarantine);
  fv[F::report_removal] = targets(PolicyAction::report_removal);
  fv[F::avatar_removal] = targets(PolicyAction::avatar_removal);
  fv[F::banner_removal] = targets(PolicyAction::banner_removal);
  fv[F::followers_only] = targets(PolicyAction::followers_only);
  fv[F::hash_ftr] = static_cast<double>(pc.hashtag_rules.federated_timeline_removal);
  fv[F::hash_rej] = static_cast<double>(pc.hashtag_rules.reject);
  fv[F::hash_sen] = static_cast<double>(pc.hashtag_rules.sensitive);

  std::int64_t n = 0, hate = 0, urls = 0, tags = 0, mentions = 0, reblogs = 0, replies = 0;
  std::int64_t with_hate = 0, with_url = 0, with_tag = 0, with_mention = 0;
  if (auto it = posts_.find(instance); it != posts_.end()) {
    const auto& posts = store_.posts();
    const auto& idx = it->second;
    auto first = std::partition_point(idx.begin(), idx.end(),
                                      [&](std::size_t i) { return posts[i].created_at < window.begin; });
    for (auto p = first; p != idx.end() && posts[*p].created_at < window.end; ++p) {
      const Post& post = posts[*p];
      ++n;
      hate += post.hate_hits;
      urls += post.urls;
      tags += post.hashtags;
      mentions += post.mentions;
      reblogs += post.reblogs_count;
      replies += post.replies_count;
      with_hate += post.hate_hits > 0;
      with_url += post.urls > 0;
      with_tag += post.hashtags > 0;
      with_mention += post.mentions > 0;
    }
  }
  fv[F::posts] = static_cast<double>(n);
  fv[F::hate_count] = static_cast<double>(hate);
  fv[F::url_count] = static_cast<double>(urls);
  fv[F::hashtags_count] = static_cast<double>(tags);
  fv[F::mentions_count] = static_cast<double>(mentions);
  fv[F::reblogs_count] = static_cast<double>(reblogs);
  fv[F::replies_count] = static_cast<double>(replies);
  if (n > 0) {
    const double dn = static_cast<double>(n);
    fv[F::hate_avg] = static_cast<double>(hate) / dn;
    fv[F::url_avg] = static_cast<double>(urls) / dn;
    fv[F::hashtags_avg] = static_cast<double>(tags) / dn;
    fv[F::mentions_avg] = static_cast<double>(mentions) / dn;
    fv[F::hate_percent] = 100.0 * static_cast<double>(with_hate) / dn;
    fv[F::url_percent] = 100.0 * static_cast<double>(with_url) / dn;
    fv[F::hashtags_percent] = 100.0 * static_cast<double>(with_tag) / dn;
    fv[F::mentions_percent] = 100.0 * static_cast<double>(with_mention) / dn;
  }
  if (lambdas) lambdas->apply(fv);
  return fv;
}

FeatureVector extract_features(const Store& store, const InstanceRef& instance, const TimeWindow& window,
                               const BoxCoxLambdas* lambdas) {
  return FeatureExtractor(store).extract(instance, window, lambdas);
}

std::string feature_table_csv(const std::vector<std::pair<InstanceRef, FeatureVector>>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "domain";
  for (auto name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (const auto& [instance, fv] : rows) {
    out << instance.domain();
    for (double v : fv.values) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace fedwatch
