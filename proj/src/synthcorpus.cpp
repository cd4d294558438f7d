#include "fedwatch/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fedwatch/policy.hpp"

namespace fedwatch {

using nlohmann::json;

// ---------------------------------------------------------------- params

void CorpusParams::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
  };
  if (n_instances < 1) throw ValidationError("n_instances must be at least 1");
  if (months < 1 || month_days < 1) throw ValidationError("months and month_days must be positive");
  if (cadence_seconds < 1) throw ValidationError("cadence_seconds must be positive");
  if (cadence_seconds > span_seconds()) throw ValidationError("cadence exceeds the observation span");
  if (log_posts_sigma < 0 || log_users_sigma < 0) throw ValidationError("log-normal sigmas must be non-negative");
  fraction(controversial_fraction, "controversial_fraction");
  fraction(response_prob_small, "response_prob_small");
  fraction(response_prob_large, "response_prob_large");
  fraction(noise_target_prob, "noise_target_prob");
  fraction(peer_prob_min, "peer_prob_min");
  fraction(peer_prob_max, "peer_prob_max");
  fraction(pre_window_edge_fraction, "pre_window_edge_fraction");
  fraction(pre_window_policy_fraction, "pre_window_policy_fraction");
  fraction(unexposed_fraction, "unexposed_fraction");
  fraction(staff_hidden_fraction, "staff_hidden_fraction");
  fraction(moderator_fraction, "moderator_fraction");
  fraction(dedicated_moderator_fraction, "dedicated_moderator_fraction");
  if (hate_rate_benign_max < 0 || hate_rate_controversial_min < 0 ||
      hate_rate_controversial_max < hate_rate_controversial_min || mention_rate_benign_min < 0 ||
      mention_rate_benign_max < mention_rate_benign_min || mention_rate_controversial_min < 0 ||
      mention_rate_controversial_max < mention_rate_controversial_min)
    throw ValidationError("rate ranges must be non-negative and ordered");
  if (!(delay_mean_days >= 0) || !(delay_shape > 0)) throw ValidationError("delays must be non-negative");
  if (policy_growth < 0) throw ValidationError("policy_growth must be non-negative");
  if (label_driver != "controversy" && label_driver != "volume" && label_driver != "mixed")
    throw ValidationError("label_driver must be 'controversy', 'volume' or 'mixed'");
  if (admin_weights.empty()) throw ValidationError("admin_weights must not be empty");
  for (const auto& [k, w] : admin_weights)
    if (k == 0 || !(w >= 0)) throw ValidationError("admin_weights need positive counts and non-negative weights");
  if (text_samples < 0) throw ValidationError("text_samples must be non-negative");
  if (text_hate_terms.empty()) throw ValidationError("text_hate_terms must not be empty");
}

#define FEDWATCH_PARAM_FIELDS(X)                                                                                \
  X(seed) X(n_instances) X(months) X(month_days) X(start) X(cadence_seconds) X(log_posts_mu) X(log_posts_sigma) \
  X(log_users_mu) X(log_users_sigma) X(users_posts_coupling) X(controversial_fraction) X(hate_rate_benign_max)  \
  X(hate_rate_controversial_min) X(hate_rate_controversial_max) X(mention_rate_benign_min)                      \
  X(mention_rate_benign_max) X(mention_rate_controversial_min) X(mention_rate_controversial_max)                \
  X(label_driver) X(visibility_posts) X(volume_threshold_posts) X(large_instance_posts) X(response_prob_small)   \
  X(response_prob_large) X(noise_target_prob) X(delay_mean_days) X(delay_shape) X(peer_prob_min)                \
  X(peer_prob_max) X(pre_window_edge_fraction) X(pre_window_policy_fraction) X(unexposed_fraction)              \
  X(staff_hidden_fraction) X(moderator_fraction) X(dedicated_moderator_fraction) X(policy_growth)               \
  X(text_samples) X(text_hate_terms)

void to_json(json& j, const CorpusParams& p) {
  j = json::object();
#define X(name) j[#name] = p.name;
  FEDWATCH_PARAM_FIELDS(X)
#undef X
  json weights = json::object();
  for (const auto& [k, w] : p.admin_weights) weights[std::to_string(k)] = w;
  j["admin_weights"] = weights;
}

void from_json(const json& j, CorpusParams& p) {
  if (!j.is_object()) throw ValidationError("corpus parameters must be a JSON object");
  static const std::set<std::string> known = {
#define X(name) #name,
      FEDWATCH_PARAM_FIELDS(X)
#undef X
          "admin_weights"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ValidationError("unknown corpus parameter '" + key + "'");
  try {
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(p.name);
    FEDWATCH_PARAM_FIELDS(X)
#undef X
    if (j.contains("admin_weights")) {
      p.admin_weights.clear();
      for (const auto& [k, w] : j.at("admin_weights").items()) p.admin_weights[std::stoul(k)] = w.get<double>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad corpus parameter: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ValidationError(std::string("bad admin_weights key: ") + e.what());
  }
}

#undef FEDWATCH_PARAM_FIELDS

// ---------------------------------------------------------------- manifest

const PlantedInstance& CorpusManifest::instance(const InstanceRef& ref) const {
  for (const auto& i : instances)
    if (i.instance == ref) return i;
  throw Error("instance " + ref.domain() + " is not part of the corpus");
}

void to_json(json& j, const CorpusManifest& m) {
  auto instances = json::array();
  for (const auto& i : m.instances) {
    const auto& t = i.totals;
    instances.push_back({{"domain", i.instance.domain()},
                         {"controversial", i.controversial},
                         {"kind", i.kind},
                         {"visible", i.visible},
                         {"exposed", i.exposed},
                         {"staff_exposed", i.staff_exposed},
                         {"admins", i.admins},
                         {"users", i.users},
                         {"size_rank", i.size_rank},
                         {"label", i.label},
                         {"totals",
                          {{"posts", t.posts},
                           {"hate_count", t.hate},
                           {"url_count", t.urls},
                           {"mentions_count", t.mentions},
                           {"hashtags_count", t.hashtags},
                           {"reblogs_count", t.reblogs},
                           {"replies_count", t.replies},
                           {"posts_with_hate", t.with_hate},
                           {"posts_with_url", t.with_url},
                           {"posts_with_hashtag", t.with_hashtag},
                           {"posts_with_mention", t.with_mention}}}});
  }
  auto policies = json::array();
  for (const auto& p : m.policies)
    policies.push_back({{"source", p.source.domain()},
                        {"target", p.target.domain()},
                        {"action", to_string(p.action)},
                        {"federated_at", p.federated_at},
                        {"policy_at", p.policy_at},
                        {"delay_days", p.delay_days},
                        {"pre_window", p.pre_window}});
  json admins = json::object();
  for (const auto& [k, c] : m.admin_histogram) admins[std::to_string(k)] = c;
  j = {{"params", m.params},
       {"start", m.start},
       {"end", m.end},
       {"planted_delay_mean_days", m.planted_delay_mean_days},
       {"admin_histogram", admins},
       {"initial_total_policies", m.initial_total_policies},
       {"final_total_policies", m.final_total_policies},
       {"instances", instances},
       {"policies", policies}};
}

// ---------------------------------------------------------------- generator

namespace {

const std::vector<std::string> kOptionalPolicies = {
    "ActivityExpirationPolicy", "AntiFollowbotPolicy", "AntiLinkSpamPolicy", "DropPolicy",
    "EnsureRePrepended",        "ForceBotUnlistedPolicy", "HellthreadPolicy",  "KeywordPolicy",
    "MediaProxyWarmingPolicy",  "MentionPolicy",      "NoPlaceholderTextPolicy", "StealEmojiPolicy",
    "SubchainPolicy",           "UserAllowListPolicy", "VocabularyPolicy"};

const std::vector<std::string> kVersions = {"2.2.0", "2.2.2", "2.3.0", "2.4.1", "2.4.2", "2.4.3"};

const std::vector<std::string> kFillerWords = {"the",    "quick", "brown",  "fox",   "river",
                                               "cloud",  "market", "garden", "window", "stone"};

struct Attributes {
  PlantedInstance planted;
  std::int64_t posts = 0;
  double hate_rate = 0, mention_rate = 0, url_rate = 0, tag_rate = 0, reblog_rate = 0, reply_rate = 0;
  std::int64_t active_month = 0, active_halfyear = 0, followers = 0, following = 0;
  std::string version;
  std::set<std::string> admins, moderators;
  std::set<std::string> base_policies;
  HashtagRuleCounts hashtag_rules;
  double response_prob = 0;
};

struct TimedPeer {
  std::size_t tick;
  std::size_t peer;
};
struct TimedTarget {
  std::size_t tick;
  SimplePolicyTarget target;
};
struct TimedPolicy {
  std::size_t tick;
  std::string name;
};

// Exact allocation of `total` items over weighted bins (largest remainder).
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (!(sum > 0)) {
    out[0] = total;
    return out;
  }
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    given += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; given < total; ++k, ++given) out[remainders[k % remainders.size()].second]++;
  return out;
}

std::size_t exact_count(double fraction, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

std::vector<TextSample> make_text_samples(const CorpusParams& p, std::mt19937_64& rng, std::size_t n_instances) {
  std::vector<TextSample> out;
  std::uniform_int_distribution<int> small(0, 3);
  std::uniform_int_distribution<std::size_t> word(0, kFillerWords.size() - 1);
  std::uniform_int_distribution<std::size_t> term(0, p.text_hate_terms.size() - 1);
  std::uniform_int_distribution<std::size_t> host(0, n_instances - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int s = 0; s < p.text_samples; ++s) {
    TextSample t;
    t.mentions = small(rng);
    t.hashtags = small(rng);
    t.urls = small(rng) % 3;
    t.hate_hits = small(rng) % 3;
    std::vector<std::string> pieces;
    for (int w = 0; w < 4 + small(rng); ++w) pieces.push_back(kFillerWords[word(rng)]);
    for (std::int64_t k = 0; k < t.mentions; ++k)
      pieces.push_back(coin(rng) ? "@user" + std::to_string(k)
                                 : "@user" + std::to_string(k) + "@i" + std::to_string(host(rng)) + ".synth.example");
    for (std::int64_t k = 0; k < t.hashtags; ++k) pieces.push_back("#topic" + std::to_string(k));
    for (std::int64_t k = 0; k < t.urls; ++k) pieces.push_back("https://site" + std::to_string(k) + ".example/page");
    for (std::int64_t k = 0; k < t.hate_hits; ++k) pieces.push_back(p.text_hate_terms[term(rng)]);
    std::shuffle(pieces.begin(), pieces.end(), rng);
    std::string body;
    for (const auto& piece : pieces) body += (body.empty() ? "" : " ") + piece;
    t.content = "<p>" + body + "</p>";
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

CorpusManifest generate_corpus(const CorpusParams& p, Store& store) {
  p.validate();
  if (!store.snapshots().empty() || !store.posts().empty()) throw Error("synthetic corpus needs an empty store");

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const auto n = static_cast<std::size_t>(p.n_instances);
  const Timestamp start = p.start;
  const Timestamp end = start + p.span_seconds();
  std::vector<Timestamp> ticks;
  for (Timestamp t = start; t < end; t += p.cadence_seconds) ticks.push_back(t);
  const Timestamp last_tick = ticks.back();
  auto tick_of = [&](Timestamp t) {
    const auto k = (t - start + p.cadence_seconds - 1) / p.cadence_seconds;
    return static_cast<std::size_t>(std::clamp<Timestamp>(k, 0, static_cast<Timestamp>(ticks.size() - 1)));
  };

  // Instance attributes.
  const int width = static_cast<int>(std::to_string(n - 1).size());
  std::vector<Attributes> inst(n);
  std::vector<double> log_posts(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = inst[i];
    std::string id = std::to_string(i);
    id.insert(0, static_cast<std::size_t>(width) - id.size(), '0');
    a.planted.instance = InstanceRef("i" + id + ".synth.example");
    const double zp = normal(rng);
    log_posts[i] = p.log_posts_mu + p.log_posts_sigma * zp;
    a.posts = std::llround(std::exp(log_posts[i]));
    const double log_users = p.log_users_mu + p.users_posts_coupling * zp + p.log_users_sigma * normal(rng);
    a.planted.users = std::max<std::int64_t>(1, std::llround(std::exp(log_users)));
    a.active_halfyear = std::llround(static_cast<double>(a.planted.users) * uniform(0.3, 0.8));
    a.active_month = std::llround(static_cast<double>(a.active_halfyear) * uniform(0.3, 0.8));
    a.followers = std::llround(static_cast<double>(a.planted.users) * uniform(2, 20));
    a.following = std::llround(static_cast<double>(a.planted.users) * uniform(1, 10));
    a.url_rate = uniform(0.05, 0.6);
    a.tag_rate = uniform(0.1, 1.0);
    a.reblog_rate = uniform(0.0, 3.0);
    a.reply_rate = uniform(0.0, 2.0);
    a.hate_rate = uniform(0.0, p.hate_rate_benign_max);
    a.mention_rate = uniform(p.mention_rate_benign_min, p.mention_rate_benign_max);
    a.version = kVersions[static_cast<std::size_t>(unit(rng) * static_cast<double>(kVersions.size())) %
                          kVersions.size()];
    a.planted.kind = "benign";
  }

  // Size rank by post volume (ties by index).
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return inst[x].posts < inst[y].posts; });
    for (std::size_t r = 0; r < n; ++r)
      inst[order[r]].planted.size_rank = n > 1 ? static_cast<double>(r) / static_cast<double>(n - 1) : 1.0;
  }

  auto pick = [&](std::size_t count) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  // Controversial instances: exact count, alternating hate-heavy and mention-heavy.
  {
    const auto chosen = pick(exact_count(p.controversial_fraction, n));
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      auto& a = inst[chosen[k]];
      a.planted.controversial = true;
      if (k % 2 == 0) {
        a.planted.kind = "hate";
        a.hate_rate = uniform(p.hate_rate_controversial_min, p.hate_rate_controversial_max);
      } else {
        a.planted.kind = "mention";
        a.mention_rate = uniform(p.mention_rate_controversial_min, p.mention_rate_controversial_max);
      }
    }
  }
  for (auto& a : inst) {
    a.planted.visible = a.planted.controversial && static_cast<double>(a.posts) >= p.visibility_posts;
  }
  for (std::size_t i : pick(exact_count(p.unexposed_fraction, n))) inst[i].planted.exposed = false;
  for (std::size_t i : pick(exact_count(p.staff_hidden_fraction, n))) inst[i].planted.staff_exposed = false;

  // Administrators: exact histogram over staff-exposing instances.
  CorpusManifest m;
  m.params = p;
  m.start = start;
  m.end = end;
  {
    std::vector<std::size_t> staffed;
    for (std::size_t i = 0; i < n; ++i)
      if (inst[i].planted.staff_exposed) staffed.push_back(i);
    std::shuffle(staffed.begin(), staffed.end(), rng);
    std::vector<std::size_t> sizes;
    std::vector<double> weights;
    for (const auto& [k, w] : p.admin_weights) {
      sizes.push_back(k);
      weights.push_back(w);
    }
    const auto counts = apportion(staffed.size(), weights);
    std::size_t cursor = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      if (counts[b] > 0) m.admin_histogram[sizes[b]] = counts[b];
      for (std::size_t c = 0; c < counts[b]; ++c) inst[staffed[cursor++]].planted.admins = sizes[b];
    }
    for (auto& a : inst) {
      if (!a.planted.staff_exposed) {
        a.planted.admins = 1;  // exists but is not published
        continue;
      }
      for (std::size_t k = 1; k <= a.planted.admins; ++k) a.admins.insert("admin" + std::to_string(k));
      if (unit(rng) < p.moderator_fraction) {
        if (unit(rng) < p.dedicated_moderator_fraction) {
          a.moderators = {"moderator1"};
        } else {
          a.moderators = {"admin1"};
        }
      }
    }
  }

  // Base policy sets and response behaviour.
  for (auto& a : inst) {
    a.base_policies = {"ObjectAgePolicy"};
    const bool recent = parse_version(a.version).value() >= kDefaultsThresholdVersion;
    if (recent && unit(rng) < 0.8) a.base_policies.insert("TagPolicy");
    if (recent && unit(rng) < 0.8) a.base_policies.insert("HashtagPolicy");
    for (const auto& extra : kOptionalPolicies)
      if (unit(rng) < 0.08) a.base_policies.insert(extra);
    if (a.base_policies.contains("HashtagPolicy")) {
      a.hashtag_rules = {static_cast<std::int64_t>(unit(rng) * 4), static_cast<std::int64_t>(unit(rng) * 3),
                         1 + static_cast<std::int64_t>(unit(rng) * 5)};
    }
    const bool responds = a.planted.exposed && !a.planted.controversial;
    a.response_prob =
        responds ? p.response_prob_small + (p.response_prob_large - p.response_prob_small) * a.planted.size_rank : 0.0;
  }

  // Peering, targets and their timing.
  std::gamma_distribution<double> delay_dist(p.delay_shape, p.delay_mean_days / p.delay_shape);
  const double max_delay_days =
      static_cast<double>(last_tick - start - p.cadence_seconds) / static_cast<double>(kSecondsPerDay);
  auto qualifies = [&](std::size_t j) {
    const bool large = static_cast<double>(inst[j].posts) >= p.volume_threshold_posts;
    if (p.label_driver == "volume") return large;
    if (p.label_driver == "mixed") return large || inst[j].planted.visible;
    return inst[j].planted.visible;
  };
  const PolicyAction actions[] = {PolicyAction::reject, PolicyAction::media_removal, PolicyAction::nsfw,
                                  PolicyAction::federated_timeline_removal, PolicyAction::quarantine,
                                  PolicyAction::reject_deletes};
  const double action_weights[] = {0.6, 0.1, 0.1, 0.1, 0.05, 0.05};
  std::discrete_distribution<std::size_t> action_dist(std::begin(action_weights), std::end(action_weights));

  std::vector<std::vector<TimedPeer>> peer_events(n);
  std::vector<std::vector<TimedTarget>> target_events(n);
  double delay_sum = 0;
  std::size_t delay_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = p.peer_prob_min + (p.peer_prob_max - p.peer_prob_min) * inst[i].planted.size_rank;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !(unit(rng) < q)) continue;
      const double target_prob = qualifies(j) ? inst[i].response_prob : (inst[i].response_prob > 0 ? p.noise_target_prob : 0.0);
      const bool targeted = unit(rng) < target_prob;
      if (!targeted) {
        const bool pre = unit(rng) < p.pre_window_edge_fraction;
        const Timestamp at = pre ? start : start + 1 + static_cast<Timestamp>(unit(rng) * static_cast<double>(last_tick - start - 1));
        peer_events[i].push_back({tick_of(at), j});
        continue;
      }
      PlantedPolicy pol;
      pol.source = inst[i].planted.instance;
      pol.target = inst[j].planted.instance;
      pol.action = actions[action_dist(rng)];
      std::size_t edge_tick = 0, policy_tick = 0;
      if (unit(rng) < p.pre_window_policy_fraction) {
        pol.pre_window = true;
      } else {
        double d = delay_dist(rng);
        for (int retry = 0; retry < 100 && d > max_delay_days; ++retry) d = delay_dist(rng);
        d = std::min(d, max_delay_days);
        const auto delay = static_cast<Timestamp>(std::llround(d * kSecondsPerDay));
        const Timestamp latest_edge = last_tick - delay;
        const Timestamp edge = start + 1 + static_cast<Timestamp>(unit(rng) * static_cast<double>(latest_edge - start - 1));
        edge_tick = tick_of(edge);
        policy_tick = tick_of(edge + delay);
        pol.delay_days = static_cast<double>(delay) / static_cast<double>(kSecondsPerDay);
        delay_sum += pol.delay_days;
        ++delay_count;
      }
      pol.federated_at = ticks[edge_tick];
      pol.policy_at = ticks[policy_tick];
      peer_events[i].push_back({edge_tick, j});
      target_events[i].push_back({policy_tick, {pol.action, pol.target}});
      inst[j].planted.label = true;
      m.policies.push_back(pol);
    }
  }
  m.planted_delay_mean_days = delay_count > 0 ? delay_sum / static_cast<double>(delay_count) : 0.0;

  // Policy growth. SimplePolicy counts once an instance has a target; the
  // remaining growth comes from enabling optional policies over time.
  std::vector<std::vector<TimedPolicy>> enable_events(n);
  {
    auto applied_at_start = [&](std::size_t i) {
      std::int64_t c = static_cast<std::int64_t>(inst[i].base_policies.size());
      const bool early_target = std::any_of(target_events[i].begin(), target_events[i].end(),
                                            [](const auto& t) { return t.tick == 0; });
      return c + (early_target ? 1 : 0);
    };
    std::int64_t initial = 0, simple_later = 0;
    std::vector<std::size_t> exposed;
    for (std::size_t i = 0; i < n; ++i) {
      if (!inst[i].planted.exposed) continue;
      exposed.push_back(i);
      initial += applied_at_start(i);
      const bool early_target = std::any_of(target_events[i].begin(), target_events[i].end(),
                                            [](const auto& t) { return t.tick == 0; });
      if (!target_events[i].empty() && !early_target) ++simple_later;
    }
    auto missing_policy = [&](std::size_t i, const std::set<std::string>& also_taken) -> std::optional<std::string> {
      std::vector<std::string> free;
      for (const auto& name : kOptionalPolicies)
        if (!inst[i].base_policies.contains(name) && !also_taken.contains(name)) free.push_back(name);
      if (free.empty()) return std::nullopt;
      return free[static_cast<std::size_t>(unit(rng) * static_cast<double>(free.size())) % free.size()];
    };
    if (!exposed.empty()) {
      auto target_total = [&] { return std::llround((1.0 + p.policy_growth) * static_cast<double>(initial)); };
      // Too much organic SimplePolicy growth: enlarge the starting configuration.
      for (int guard = 0; target_total() - initial < simple_later && guard < 100000; ++guard) {
        const std::size_t i = exposed[static_cast<std::size_t>(unit(rng) * static_cast<double>(exposed.size())) % exposed.size()];
        if (auto name = missing_policy(i, {})) {
          inst[i].base_policies.insert(*name);
          ++initial;
        }
      }
      std::int64_t extra = target_total() - initial - simple_later;
      std::vector<std::set<std::string>> scheduled(n);
      for (int guard = 0; extra > 0 && guard < 1000000; ++guard) {
        const std::size_t i = exposed[static_cast<std::size_t>(unit(rng) * static_cast<double>(exposed.size())) % exposed.size()];
        auto name = missing_policy(i, scheduled[i]);
        if (!name) continue;
        scheduled[i].insert(*name);
        const Timestamp at = start + 1 + static_cast<Timestamp>(unit(rng) * static_cast<double>(last_tick - start - 1));
        enable_events[i].push_back({tick_of(at), *name});
        --extra;
      }
      m.initial_total_policies = initial;
      m.final_total_policies = target_total() - extra;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    std::stable_sort(peer_events[i].begin(), peer_events[i].end(),
                     [](const auto& a, const auto& b) { return a.tick < b.tick; });
    std::stable_sort(target_events[i].begin(), target_events[i].end(),
                     [](const auto& a, const auto& b) { return a.tick < b.tick; });
    std::stable_sort(enable_events[i].begin(), enable_events[i].end(),
                     [](const auto& a, const auto& b) { return a.tick < b.tick; });
  }

  // Snapshots, tick by tick, with edges diffed exactly as a crawler would.
  {
    std::vector<std::set<InstanceRef>> peers(n);
    std::vector<PolicyConfig> configs(n);
    std::vector<std::size_t> peer_cursor(n, 0), target_cursor(n, 0), enable_cursor(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!inst[i].planted.exposed) {
        configs[i] = PolicyConfig::unexposed();
        continue;
      }
      configs[i].enabled_policies = inst[i].base_policies;
      configs[i].hashtag_rules = inst[i].hashtag_rules;
    }
    for (std::size_t k = 0; k < ticks.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        auto& a = inst[i];
        std::set<InstanceRef> added;
        auto& pc = peer_cursor[i];
        while (pc < peer_events[i].size() && peer_events[i][pc].tick <= k)
          added.insert(inst[peer_events[i][pc++].peer].planted.instance);
        if (!added.empty()) {
          std::set<InstanceRef> now = peers[i];
          now.insert(added.begin(), added.end());
          store.append_edges(store.diff_edges(a.planted.instance, peers[i], now, ticks[k]));
          peers[i] = std::move(now);
        }
        auto& cfg = configs[i];
        if (cfg.exposed) {
          auto& tc = target_cursor[i];
          while (tc < target_events[i].size() && target_events[i][tc].tick <= k) {
            cfg.simple_targets.push_back(target_events[i][tc++].target);
            cfg.enabled_policies.insert("SimplePolicy");
          }
          auto& ec = enable_cursor[i];
          while (ec < enable_events[i].size() && enable_events[i][ec].tick <= k)
            cfg.enabled_policies.insert(enable_events[i][ec++].name);
        }
        InstanceSnapshot s;
        s.instance = a.planted.instance;
        s.observed_at = ticks[k];
        s.user_count = a.planted.users;
        s.post_count = a.posts;
        s.active_month = a.active_month;
        s.active_halfyear = a.active_halfyear;
        s.followers = a.followers;
        s.following = a.following;
        s.version = a.version;
        s.staff_exposed = a.planted.staff_exposed;
        s.admins = a.admins;
        s.moderators = a.moderators;
        s.policy_config = cfg;
        store.append_snapshot(s);
      }
    }
  }

  // Local posts: counters only, spread uniformly over the observation.
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = inst[i];
    std::vector<Timestamp> times(static_cast<std::size_t>(a.posts));
    for (auto& t : times) t = start + static_cast<Timestamp>(unit(rng) * static_cast<double>(end - start));
    std::sort(times.begin(), times.end());
    std::poisson_distribution<std::int64_t> hate(a.hate_rate), mention(a.mention_rate), url(a.url_rate),
        tag(a.tag_rate), reblog(a.reblog_rate), reply(a.reply_rate);
    auto& tot = a.planted.totals;
    for (std::size_t k = 0; k < times.size(); ++k) {
      Post post;
      post.instance = a.planted.instance;
      post.post_id = std::to_string(k + 1);
      post.created_at = times[k];
      post.hate_hits = a.hate_rate > 0 ? hate(rng) : 0;
      post.mentions = a.mention_rate > 0 ? mention(rng) : 0;
      post.urls = url(rng);
      post.hashtags = tag(rng);
      post.reblogs_count = a.reblog_rate > 0 ? reblog(rng) : 0;
      post.replies_count = a.reply_rate > 0 ? reply(rng) : 0;
      store.append_post(post);
      tot.posts++;
      tot.hate += post.hate_hits;
      tot.mentions += post.mentions;
      tot.urls += post.urls;
      tot.hashtags += post.hashtags;
      tot.reblogs += post.reblogs_count;
      tot.replies += post.replies_count;
      tot.with_hate += post.hate_hits > 0;
      tot.with_mention += post.mentions > 0;
      tot.with_url += post.urls > 0;
      tot.with_hashtag += post.hashtags > 0;
    }
  }

  for (auto& a : inst) m.instances.push_back(a.planted);
  m.text_samples = make_text_samples(p, rng, n);
  return m;
}

CorpusManifest write_corpus(const CorpusParams& params, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (fs::exists(out_dir / "snapshots.ndjson") && fs::file_size(out_dir / "snapshots.ndjson") > 0)
    throw Error("refusing to overwrite the store at " + out_dir.string());
  params.validate();
  auto store = Store::open(out_dir);
  auto manifest = generate_corpus(params, store);
  {
    std::ofstream out(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << json(manifest).dump(1) << '\n';
  }
  std::ofstream samples(out_dir / "text_samples.jsonl", std::ios::binary | std::ios::trunc);
  for (const auto& t : manifest.text_samples)
    samples << json{{"content", t.content},
                    {"mentions", t.mentions},
                    {"hashtags", t.hashtags},
                    {"urls", t.urls},
                    {"hate_hits", t.hate_hits}}
                   .dump()
            << '\n';
  if (!samples) throw Error("failed writing " + (out_dir / "text_samples.jsonl").string());
  return manifest;
}

}  // namespace fedwatch
