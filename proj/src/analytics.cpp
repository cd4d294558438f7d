#include "fedwatch/analytics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace fedwatch {

namespace {

constexpr std::size_t kTopGrowthPolicies = 5;
constexpr std::size_t kTopSplitPolicies = 15;

std::string num(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

// ok snapshots grouped per instance, each list sorted by time.
std::map<InstanceRef, std::vector<const InstanceSnapshot*>> ok_timelines(const Store& store) {
  std::map<InstanceRef, std::vector<const InstanceSnapshot*>> out;
  for (const auto& s : store.snapshots())
    if (s.fetch_status.ok()) out[s.instance].push_back(&s);
  for (auto& [_, list] : out)
    std::stable_sort(list.begin(), list.end(),
                     [](const auto* a, const auto* b) { return a->observed_at < b->observed_at; });
  return out;
}

std::vector<const InstanceSnapshot*> latest_from(
    const std::map<InstanceRef, std::vector<const InstanceSnapshot*>>& timelines, Timestamp at) {
  std::vector<const InstanceSnapshot*> out;
  for (const auto& [_, list] : timelines) {
    auto it = std::upper_bound(list.begin(), list.end(), at,
                               [](Timestamp t, const InstanceSnapshot* s) { return t < s->observed_at; });
    if (it != list.begin()) out.push_back(*std::prev(it));
  }
  return out;
}

}  // namespace

std::set<std::string> applied_policies(const PolicyConfig& config) {
  std::set<std::string> out;
  if (!config.exposed) return out;
  for (const auto& name : config.enabled_policies) {
    if (name == "SimplePolicy") continue;
    if (name == "NoOpPolicy" && config.enabled_policies.size() > 1) continue;
    out.insert(name);
  }
  if (!config.simple_targets.empty()) out.insert("SimplePolicy");
  return out;
}

std::vector<const InstanceSnapshot*> latest_snapshots(const Store& store, Timestamp at) {
  return latest_from(ok_timelines(store), at);
}

std::vector<FootprintRow> footprint_of(const std::vector<const InstanceSnapshot*>& snapshots) {
  std::size_t n = 0;
  double users = 0, posts = 0;
  std::map<std::string, FootprintRow> rows;
  for (const auto* s : snapshots) {
    if (!s->policy_config.exposed) continue;
    ++n;
    users += static_cast<double>(s->user_count);
    posts += static_cast<double>(s->post_count);
    for (const auto& p : applied_policies(s->policy_config)) {
      auto& row = rows[p];
      row.policy = p;
      row.instances++;
      row.pct_users += static_cast<double>(s->user_count);
      row.pct_posts += static_cast<double>(s->post_count);
    }
  }
  std::vector<FootprintRow> out;
  for (auto& [_, row] : rows) {
    row.pct_instances = static_cast<double>(row.instances) / static_cast<double>(n);
    row.pct_users = users > 0 ? row.pct_users / users : 0.0;
    row.pct_posts = posts > 0 ? row.pct_posts / posts : 0.0;
    out.push_back(row);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.pct_instances > b.pct_instances; });
  return out;
}

std::vector<FootprintRow> policy_footprint(const Store& store, Timestamp at) {
  const auto snaps = latest_snapshots(store, at);
  if (snaps.empty()) throw Error("no successful snapshot at or before the requested time");
  return footprint_of(snaps);
}

GrowthSeries policy_growth_series(const Store& store, Timestamp bucket) {
  if (bucket <= 0) throw Error("growth bucket must be positive");
  const auto span = store.time_span();
  if (!span) throw Error("store holds no snapshots");
  const auto timelines = ok_timelines(store);

  GrowthSeries g;
  for (Timestamp start = span->first; start <= span->second; start += bucket)
    g.times.push_back(std::min(start + bucket - 1, span->second));

  std::vector<std::vector<const InstanceSnapshot*>> states;
  for (Timestamp t : g.times) states.push_back(latest_from(timelines, t));

  const auto final_rows = footprint_of(states.back());
  std::set<std::string> top;
  for (std::size_t i = 0; i < final_rows.size() && i < kTopGrowthPolicies; ++i) {
    g.names.push_back(final_rows[i].policy);
    top.insert(final_rows[i].policy);
  }
  g.names.push_back(kOthersSeries);
  g.pct.assign(g.names.size(), std::vector<double>(g.times.size(), 0.0));

  for (std::size_t b = 0; b < g.times.size(); ++b) {
    std::size_t exposed = 0, others = 0;
    std::int64_t total = 0;
    std::map<std::string, std::size_t> using_policy;
    for (const auto* s : states[b]) {
      if (!s->policy_config.exposed) continue;
      ++exposed;
      bool other = false;
      for (const auto& p : applied_policies(s->policy_config)) {
        ++total;
        using_policy[p]++;
        other = other || !top.contains(p);
      }
      others += other;
    }
    g.total_policies.push_back(total);
    g.exposed_instances.push_back(exposed);
    if (exposed == 0) continue;
    const double denom = static_cast<double>(exposed);
    for (std::size_t k = 0; k + 1 < g.names.size(); ++k)
      g.pct[k][b] = static_cast<double>(using_policy[g.names[k]]) / denom;
    g.pct.back()[b] = static_cast<double>(others) / denom;
  }
  return g;
}

std::map<std::size_t, double> AdminHistogram::fractions() const {
  std::map<std::size_t, double> out;
  for (const auto& [k, c] : counts) out[k] = static_cast<double>(c) / static_cast<double>(total);
  return out;
}

AdminHistogram admin_distribution(const Store& store, Timestamp at) {
  AdminHistogram h;
  for (const auto* s : latest_snapshots(store, at)) {
    if (!s->staff_exposed || s->admins.empty()) continue;
    h.counts[s->admins.size()]++;
    h.total++;
  }
  return h;
}

double posts_admins_spearman(const Store& store, Timestamp at) {
  std::vector<double> posts, admins;
  for (const auto* s : latest_snapshots(store, at)) {
    if (!s->staff_exposed || s->admins.empty()) continue;
    posts.push_back(static_cast<double>(s->post_count));
    admins.push_back(static_cast<double>(s->admins.size()));
  }
  return spearman(posts, admins);
}

std::vector<LagRecord> response_lags(const Store& store, const std::optional<std::set<InstanceRef>>& targets) {
  // First time each (source, target) pair shows up in the source's simple-policy targets.
  std::map<std::pair<InstanceRef, InstanceRef>, Timestamp> first_policy;
  for (const auto& [source, list] : ok_timelines(store))
    for (const auto* s : list)
      for (const auto& t : s->policy_config.simple_targets) first_policy.try_emplace({source, t.target}, s->observed_at);

  std::vector<LagRecord> out;
  for (const auto& e : store.edges()) {
    if (e.pre_window) continue;
    if (targets && !targets->contains(e.target)) continue;
    auto it = first_policy.find({e.source, e.target});
    if (it == first_policy.end() || it->second < e.first_seen) continue;
    out.push_back({e.source, e.target, e.first_seen, it->second,
                   static_cast<double>(it->second - e.first_seen) / static_cast<double>(kSecondsPerDay)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
  return out;
}

EmpiricalCdf empirical_cdf(const std::vector<double>& values) { return EmpiricalCdf(values); }

std::vector<double> lag_days(const std::vector<LagRecord>& lags) {
  std::vector<double> out;
  for (const auto& l : lags) out.push_back(l.lag_days);
  return out;
}

TargetRanking rank_targets(const Store& store, std::size_t k) {
  const auto span = store.time_span();
  std::map<InstanceRef, std::size_t> against;
  if (span) {
    for (const auto* s : latest_snapshots(store, span->second)) {
      std::set<InstanceRef> seen;
      for (const auto& t : s->policy_config.simple_targets)
        if (t.target != s->instance && seen.insert(t.target).second) against[t.target]++;
    }
  }
  std::vector<std::pair<InstanceRef, std::size_t>> all(against.begin(), against.end());
  TargetRanking r;
  auto by_count_desc = all;
  std::stable_sort(by_count_desc.begin(), by_count_desc.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  r.top.assign(by_count_desc.begin(), by_count_desc.begin() + static_cast<std::ptrdiff_t>(std::min(k, all.size())));
  auto by_count_asc = all;
  std::stable_sort(by_count_asc.begin(), by_count_asc.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  r.bottom.assign(by_count_asc.begin(), by_count_asc.begin() + static_cast<std::ptrdiff_t>(std::min(k, all.size())));
  return r;
}

bool has_dedicated_moderators(const InstanceSnapshot& s) {
  return std::any_of(s.moderators.begin(), s.moderators.end(),
                     [&](const std::string& m) { return !s.admins.contains(m); });
}

ModeratorSplit moderator_split(const Store& store, Timestamp at) {
  ModeratorSplit out;
  std::vector<const InstanceSnapshot*> with, without;
  std::vector<const InstanceSnapshot*> everyone;
  for (const auto* s : latest_snapshots(store, at)) {
    if (!s->staff_exposed) continue;
    everyone.push_back(s);
    if (has_dedicated_moderators(*s)) {
      with.push_back(s);
      out.with_dedicated_mods.push_back(s->instance);
    } else {
      without.push_back(s);
      out.without.push_back(s->instance);
    }
  }
  const auto overall = footprint_of(everyone);
  auto restrict_top = [&](const std::vector<FootprintRow>& rows) {
    std::vector<FootprintRow> kept;
    for (std::size_t i = 0; i < overall.size() && i < kTopSplitPolicies; ++i) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.policy == overall[i].policy; });
      kept.push_back(it != rows.end() ? *it : FootprintRow{overall[i].policy, 0, 0, 0, 0});
    }
    return kept;
  };
  out.with_footprint = restrict_top(footprint_of(with));
  out.without_footprint = restrict_top(footprint_of(without));

  const std::set<InstanceRef> with_set(out.with_dedicated_mods.begin(), out.with_dedicated_mods.end());
  const std::set<InstanceRef> without_set(out.without.begin(), out.without.end());
  for (const auto& l : response_lags(store)) {
    if (l.policy_at > at) continue;
    if (with_set.contains(l.source)) out.with_lags.push_back(l.lag_days);
    if (without_set.contains(l.source)) out.without_lags.push_back(l.lag_days);
  }
  return out;
}

std::string footprint_csv(const std::vector<FootprintRow>& rows) {
  std::string out = "policy,pct_instances,pct_users,pct_posts,instances\n";
  for (const auto& r : rows)
    out += r.policy + ',' + num(r.pct_instances) + ',' + num(r.pct_users) + ',' + num(r.pct_posts) + ',' +
           std::to_string(r.instances) + '\n';
  return out;
}

std::string growth_csv(const GrowthSeries& g) {
  std::string out = "time";
  for (const auto& n : g.names) out += ',' + n;
  out += ",total_policies,exposed_instances\n";
  for (std::size_t b = 0; b < g.times.size(); ++b) {
    out += std::to_string(g.times[b]);
    for (const auto& series : g.pct) out += ',' + num(series[b]);
    out += ',' + std::to_string(g.total_policies[b]) + ',' + std::to_string(g.exposed_instances[b]) + '\n';
  }
  return out;
}

std::string admins_csv(const AdminHistogram& h) {
  std::string out = "admins,instances,fraction\n";
  for (const auto& [k, frac] : h.fractions())
    out += std::to_string(k) + ',' + std::to_string(h.counts.at(k)) + ',' + num(frac) + '\n';
  return out;
}

std::string lags_csv(const std::vector<LagRecord>& lags) {
  std::string out = "source,target,federated_at,policy_at,lag_days\n";
  for (const auto& l : lags)
    out += l.source.domain() + ',' + l.target.domain() + ',' + std::to_string(l.federated_at) + ',' +
           std::to_string(l.policy_at) + ',' + num(l.lag_days) + '\n';
  return out;
}

std::string moderator_split_csv(const ModeratorSplit& s) {
  std::string out = "group,metric,key,value\n";
  auto emit = [&](const char* group, const std::vector<InstanceRef>& members, const std::vector<FootprintRow>& rows,
                  const std::vector<double>& lags) {
    out += std::string(group) + ",instances,," + std::to_string(members.size()) + '\n';
    for (const auto& r : rows) out += std::string(group) + ",footprint," + r.policy + ',' + num(r.pct_instances) + '\n';
    for (std::size_t i = 0; i < lags.size(); ++i)
      out += std::string(group) + ",lag_days," + std::to_string(i) + ',' + num(lags[i]) + '\n';
  };
  emit("with_dedicated_mods", s.with_dedicated_mods, s.with_footprint, s.with_lags);
  emit("without", s.without, s.without_footprint, s.without_lags);
  return out;
}

}  // namespace fedwatch
