#include "fedwatch/policy.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace fedwatch {

using nlohmann::json;

namespace {

json parse_body(const std::string& body, const std::string& path) {
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError(path, "body is not valid JSON");
  if (!j.is_object()) throw ParseError(path, "expected a JSON object");
  return j;
}

const json* child(const json& j, std::string_view key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

const json* descend(const json& j, std::initializer_list<std::string_view> keys) {
  const json* cur = &j;
  for (auto k : keys) {
    cur = child(*cur, k);
    if (!cur) return nullptr;
  }
  return cur;
}

std::int64_t count_at(const json& j, std::initializer_list<std::string_view> keys) {
  const json* v = descend(j, keys);
  if (!v || !v->is_number()) return 0;
  return std::max<std::int64_t>(0, v->get<std::int64_t>());
}

std::vector<std::string> string_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const auto here = path + "[" + std::to_string(i) + "]";
    if (e.is_string()) {
      out.push_back(e.get<std::string>());
    } else if (e.is_array() && !e.empty() && e[0].is_string()) {
      // {domain, reason} tuples as exported by some versions
      out.push_back(e[0].get<std::string>());
    } else if (e.is_object() && child(e, "instance") && e["instance"].is_string()) {
      out.push_back(e["instance"].get<std::string>());
    } else {
      throw ParseError(here, "expected a string entry");
    }
  }
  return out;
}

std::optional<PolicyAction> simple_action_key(std::string_view key) {
  if (key == "media_nsfw") return PolicyAction::nsfw;
  if (key == "quarantined_instances") return PolicyAction::quarantine;
  return policy_action_from_string(key);
}

std::string normalize_target(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s.starts_with("*.")) s.erase(0, 2);
  return s;
}

void add_targets(PolicyConfig& config, std::string_view key, PolicyAction action,
                 const std::vector<std::string>& entries) {
  for (const auto& raw : entries) {
    const auto domain = normalize_target(raw);
    if (InstanceRef::is_valid_domain(domain)) {
      SimplePolicyTarget t{action, InstanceRef(domain)};
      if (std::find(config.simple_targets.begin(), config.simple_targets.end(), t) ==
          config.simple_targets.end()) {
        config.simple_targets.push_back(std::move(t));
      }
    } else {
      // Entries that are not plain domains (regexes, IPs with ports) stay visible.
      config.other_actions[std::string(key)].push_back(raw);
    }
  }
}

// Nodeinfo first, then the Pleroma extension block of /api/v1/instance.
std::pair<const json*, std::string> find_federation(const json& instance, const json* nodeinfo) {
  if (nodeinfo) {
    if (const json* f = descend(*nodeinfo, {"metadata", "federation"})) {
      return {f, "$nodeinfo.metadata.federation"};
    }
  }
  if (const json* f = descend(instance, {"pleroma", "metadata", "federation"})) {
    return {f, "$instance.pleroma.metadata.federation"};
  }
  return {nullptr, {}};
}

PolicyConfig parse_federation(const json& fed, const std::string& path) {
  if (!fed.is_object()) throw ParseError(path, "expected an object");
  const json* policies = child(fed, "mrf_policies");
  const json* simple = child(fed, "mrf_simple");
  const json* quarantined = child(fed, "quarantined_instances");
  const json* hashtag = child(fed, "mrf_hashtag");
  if (!policies && !simple && !quarantined && !hashtag) return PolicyConfig::unexposed();

  PolicyConfig config;
  if (policies) {
    for (const auto& name : string_list(*policies, path + ".mrf_policies")) {
      auto stripped = strip_policy_namespace(name);
      if (!stripped.empty()) config.enabled_policies.insert(std::move(stripped));
    }
  }
  if (simple) {
    const auto spath = path + ".mrf_simple";
    if (!simple->is_object()) throw ParseError(spath, "expected an object");
    for (const auto& [key, value] : simple->items()) {
      auto entries = string_list(value, spath + "." + key);
      if (auto action = simple_action_key(key)) {
        add_targets(config, key, *action, entries);
      } else {
        auto& bucket = config.other_actions[key];
        bucket.insert(bucket.end(), entries.begin(), entries.end());
      }
    }
  }
  if (quarantined) {
    add_targets(config, "quarantined_instances", PolicyAction::quarantine,
                string_list(*quarantined, path + ".quarantined_instances"));
  }
  if (hashtag) {
    const auto hpath = path + ".mrf_hashtag";
    if (!hashtag->is_object()) throw ParseError(hpath, "expected an object");
    auto size_of = [&](std::string_view key) -> std::int64_t {
      const json* v = child(*hashtag, key);
      if (!v) return 0;
      return static_cast<std::int64_t>(string_list(*v, hpath + "." + std::string(key)).size());
    };
    config.hashtag_rules.federated_timeline_removal = size_of("federated_timeline_removal");
    config.hashtag_rules.reject = size_of("reject");
    config.hashtag_rules.sensitive = size_of("sensitive");
  }
  return config;
}

struct ParsedDocs {
  json instance;
  std::optional<json> nodeinfo;
};

ParsedDocs parse_docs(const MetadataDocument& document) {
  ParsedDocs d;
  d.instance = parse_body(document.instance_body, "$instance");
  if (document.nodeinfo_body) d.nodeinfo = parse_body(*document.nodeinfo_body, "$nodeinfo");
  return d;
}

PolicyConfig policies_from(const ParsedDocs& d) {
  auto [fed, path] = find_federation(d.instance, d.nodeinfo ? &*d.nodeinfo : nullptr);
  if (!fed) return PolicyConfig::unexposed();
  return parse_federation(*fed, path);
}

std::set<std::string> id_set(const json& j, const std::string& path) {
  auto v = string_list(j, path);
  return {v.begin(), v.end()};
}

}  // namespace

std::string strip_policy_namespace(std::string_view name) {
  const auto pos = name.find_last_of(".:/\\");
  auto tail = pos == std::string_view::npos ? name : name.substr(pos + 1);
  while (!tail.empty() && std::isspace(static_cast<unsigned char>(tail.front()))) tail.remove_prefix(1);
  while (!tail.empty() && std::isspace(static_cast<unsigned char>(tail.back()))) tail.remove_suffix(1);
  return std::string(tail);
}

PolicyConfig parse_policies(const MetadataDocument& document) {
  return policies_from(parse_docs(document));
}

bool ParsedMetadata::pleroma_compatible() const {
  return software == "pleroma" || software == "akkoma";
}

ParsedMetadata parse_metadata(const MetadataDocument& document) {
  const auto docs = parse_docs(document);
  const json& inst = docs.instance;
  const json* ni = docs.nodeinfo ? &*docs.nodeinfo : nullptr;

  ParsedMetadata m;
  m.policy = policies_from(docs);

  if (ni) {
    if (const json* name = descend(*ni, {"software", "name"}); name && name->is_string()) {
      m.software = name->get<std::string>();
    }
    if (const json* v = descend(*ni, {"software", "version"}); v && v->is_string()) {
      m.version = v->get<std::string>();
    }
  }
  if (m.version.empty()) {
    if (const json* v = child(inst, "version"); v && v->is_string()) m.version = v->get<std::string>();
  }
  if (m.software.empty()) {
    if (child(inst, "pleroma") || m.version.find("Pleroma") != std::string::npos) {
      m.software = "pleroma";
    } else if (m.version.find("Akkoma") != std::string::npos) {
      m.software = "akkoma";
    }
  }
  std::transform(m.software.begin(), m.software.end(), m.software.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  m.user_count = count_at(inst, {"stats", "user_count"});
  m.post_count = count_at(inst, {"stats", "status_count"});
  if (ni) {
    if (m.user_count == 0) m.user_count = count_at(*ni, {"usage", "users", "total"});
    if (m.post_count == 0) m.post_count = count_at(*ni, {"usage", "localPosts"});
    m.active_month = count_at(*ni, {"usage", "users", "activeMonth"});
    m.active_halfyear = count_at(*ni, {"usage", "users", "activeHalfyear"});

    if (const json* staff = descend(*ni, {"metadata", "staff"})) {
      m.staff_exposed = true;
      if (const json* a = child(*staff, "admins")) m.admins = id_set(*a, "$nodeinfo.metadata.staff.admins");
      if (const json* mo = child(*staff, "moderators")) {
        m.moderators = id_set(*mo, "$nodeinfo.metadata.staff.moderators");
      }
    } else if (const json* accounts = descend(*ni, {"metadata", "staffAccounts"})) {
      m.staff_exposed = true;
      m.admins = id_set(*accounts, "$nodeinfo.metadata.staffAccounts");
    }
  }
  if (m.admins.empty() && m.moderators.empty()) m.staff_exposed = false;
  return m;
}

std::optional<VersionTriple> parse_version(std::string_view version) {
  static const std::regex compat(R"(Pleroma\s+(\d+)\.(\d+)(?:\.(\d+))?)");
  static const std::regex plain(R"((\d+)\.(\d+)(?:\.(\d+))?)");
  const std::string s(version);
  std::smatch m;
  if (!std::regex_search(s, m, compat) && !std::regex_search(s, m, plain)) return std::nullopt;
  VersionTriple v{std::stoi(m[1].str()), std::stoi(m[2].str()), m[3].matched ? std::stoi(m[3].str()) : 0};
  return v;
}

const std::set<std::string>& default_policies(const VersionTriple& version) {
  static const std::set<std::string> pre{"ObjectAgePolicy", "NoOpPolicy"};
  static const std::set<std::string> post{"ObjectAgePolicy", "NoOpPolicy", "TagPolicy", "HashtagPolicy"};
  return version < kDefaultsThresholdVersion ? pre : post;
}

bool classify_default(std::string_view policy_name, std::string_view version) {
  auto parsed = parse_version(version);
  if (!parsed) {
    spdlog::warn("unparseable version '{}', classifying against post-2.3.0 defaults", version);
    parsed = kDefaultsThresholdVersion;
  }
  return default_policies(*parsed).contains(std::string(policy_name));
}

bool default_only(const PolicyConfig& config, std::string_view version) {
  if (!config.exposed) throw Error("default_only: policy configuration is not exposed");
  return std::all_of(config.enabled_policies.begin(), config.enabled_policies.end(),
                     [&](const std::string& p) { return classify_default(p, version); });
}

}  // namespace fedwatch
