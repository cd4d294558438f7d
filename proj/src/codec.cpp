#include "fedwatch/codec.hpp"

namespace fedwatch {

using nlohmann::json;

void to_json(json& j, const InstanceRef& r) { j = r.domain(); }
void from_json(const json& j, InstanceRef& r) { r = InstanceRef(j.get<std::string>()); }

void to_json(json& j, const FetchOutcome& o) {
  j = json{{"class", to_string(o.cls)}};
  if (!o.reason.empty()) j["reason"] = o.reason;
}

void from_json(const json& j, FetchOutcome& o) {
  o.cls = fetch_class_from_string(j.at("class").get<std::string>());
  o.reason = j.value("reason", std::string{});
}

void to_json(json& j, const SimplePolicyTarget& t) {
  j = json{{"action", to_string(t.action)}, {"target", t.target}};
}

void from_json(const json& j, SimplePolicyTarget& t) {
  const auto name = j.at("action").get<std::string>();
  auto action = policy_action_from_string(name);
  if (!action) throw ValidationError("unknown simple-policy action '" + name + "'");
  t.action = *action;
  t.target = j.at("target").get<InstanceRef>();
}

void to_json(json& j, const PolicyConfig& c) {
  j = json{{"exposed", c.exposed},
           {"enabled_policies", c.enabled_policies},
           {"simple_targets", c.simple_targets},
           {"other_actions", c.other_actions},
           {"hashtag_rules",
            {{"federated_timeline_removal", c.hashtag_rules.federated_timeline_removal},
             {"reject", c.hashtag_rules.reject},
             {"sensitive", c.hashtag_rules.sensitive}}}};
}

void from_json(const json& j, PolicyConfig& c) {
  c.exposed = j.at("exposed").get<bool>();
  c.enabled_policies = j.at("enabled_policies").get<std::set<std::string>>();
  c.simple_targets = j.at("simple_targets").get<std::vector<SimplePolicyTarget>>();
  c.other_actions = j.at("other_actions").get<std::map<std::string, std::vector<std::string>>>();
  const auto& h = j.at("hashtag_rules");
  c.hashtag_rules.federated_timeline_removal = h.at("federated_timeline_removal").get<std::int64_t>();
  c.hashtag_rules.reject = h.at("reject").get<std::int64_t>();
  c.hashtag_rules.sensitive = h.at("sensitive").get<std::int64_t>();
}

void to_json(json& j, const InstanceSnapshot& s) {
  j = json{{"kind", "snapshot"},
           {"instance", s.instance},
           {"observed_at", s.observed_at},
           {"user_count", s.user_count},
           {"post_count", s.post_count},
           {"active_month", s.active_month},
           {"active_halfyear", s.active_halfyear},
           {"followers", s.followers},
           {"following", s.following},
           {"version", s.version},
           {"staff_exposed", s.staff_exposed},
           {"admins", s.admins},
           {"moderators", s.moderators},
           {"policy_config", s.policy_config},
           {"fetch_status", s.fetch_status}};
}

void from_json(const json& j, InstanceSnapshot& s) {
  s.instance = j.at("instance").get<InstanceRef>();
  s.observed_at = j.at("observed_at").get<Timestamp>();
  s.user_count = j.at("user_count").get<std::int64_t>();
  s.post_count = j.at("post_count").get<std::int64_t>();
  s.active_month = j.at("active_month").get<std::int64_t>();
  s.active_halfyear = j.at("active_halfyear").get<std::int64_t>();
  s.followers = j.value("followers", std::int64_t{0});
  s.following = j.value("following", std::int64_t{0});
  s.version = j.at("version").get<std::string>();
  s.staff_exposed = j.value("staff_exposed", true);
  s.admins = j.at("admins").get<std::set<std::string>>();
  s.moderators = j.at("moderators").get<std::set<std::string>>();
  s.policy_config = j.at("policy_config").get<PolicyConfig>();
  s.fetch_status = j.at("fetch_status").get<FetchOutcome>();
}

void to_json(json& j, const FederationEdge& e) {
  j = json{{"kind", "edge"},
           {"source", e.source},
           {"target", e.target},
           {"first_seen", e.first_seen},
           {"pre_window", e.pre_window}};
}

void from_json(const json& j, FederationEdge& e) {
  e.source = j.at("source").get<InstanceRef>();
  e.target = j.at("target").get<InstanceRef>();
  e.first_seen = j.at("first_seen").get<Timestamp>();
  e.pre_window = j.at("pre_window").get<bool>();
}

void to_json(json& j, const Post& p) {
  j = json{{"kind", "post"},
           {"instance", p.instance},
           {"post_id", p.post_id},
           {"created_at", p.created_at},
           {"mentions", p.mentions},
           {"hashtags", p.hashtags},
           {"urls", p.urls},
           {"hate_hits", p.hate_hits},
           {"reblogs_count", p.reblogs_count},
           {"replies_count", p.replies_count}};
}

void from_json(const json& j, Post& p) {
  p.instance = j.at("instance").get<InstanceRef>();
  p.post_id = j.at("post_id").get<std::string>();
  p.created_at = j.at("created_at").get<Timestamp>();
  p.mentions = j.at("mentions").get<std::int64_t>();
  p.hashtags = j.at("hashtags").get<std::int64_t>();
  p.urls = j.at("urls").get<std::int64_t>();
  p.hate_hits = j.at("hate_hits").get<std::int64_t>();
  p.reblogs_count = j.at("reblogs_count").get<std::int64_t>();
  p.replies_count = j.at("replies_count").get<std::int64_t>();
}

}  // namespace fedwatch
