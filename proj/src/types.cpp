#include "fedwatch/types.hpp"

#include <algorithm>
#include <cctype>

namespace fedwatch {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

bool InstanceRef::is_valid_domain(std::string_view domain) {
  if (domain.empty() || domain.size() > 253) return false;
  if (domain.front() == '.' || domain.back() == '.' || domain.front() == '-') return false;
  std::size_t label_len = 0;
  for (char c : domain) {
    if (c == '.') {
      if (label_len == 0) return false;
      label_len = 0;
      continue;
    }
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) return false;
    if (++label_len > 63) return false;
  }
  return true;
}

InstanceRef::InstanceRef(std::string_view domain) : domain_(lower(domain)) {
  if (!is_valid_domain(domain_)) {
    throw ValidationError("invalid instance domain '" + std::string(domain) + "'");
  }
}

std::string_view to_string(FetchClass c) {
  switch (c) {
    case FetchClass::ok: return "ok";
    case FetchClass::non_existent_domain: return "non_existent_domain";
    case FetchClass::not_found_404: return "not_found_404";
    case FetchClass::private_403: return "private_403";
    case FetchClass::bad_gateway_502: return "bad_gateway_502";
    case FetchClass::unavailable_503: return "unavailable_503";
    case FetchClass::gone_410: return "gone_410";
    case FetchClass::other: return "other";
  }
  return "other";
}

FetchClass fetch_class_from_string(std::string_view s) {
  for (FetchClass c : kAllFetchClasses) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown fetch class '" + std::string(s) + "'");
}

std::string_view to_string(PolicyAction a) {
  switch (a) {
    case PolicyAction::reject: return "reject";
    case PolicyAction::accept: return "accept";
    case PolicyAction::nsfw: return "nsfw";
    case PolicyAction::media_removal: return "media_removal";
    case PolicyAction::federated_timeline_removal: return "federated_timeline_removal";
    case PolicyAction::quarantine: return "quarantine";
    case PolicyAction::reject_deletes: return "reject_deletes";
    case PolicyAction::report_removal: return "report_removal";
    case PolicyAction::avatar_removal: return "avatar_removal";
    case PolicyAction::banner_removal: return "banner_removal";
    case PolicyAction::followers_only: return "followers_only";
  }
  return "reject";
}

std::optional<PolicyAction> policy_action_from_string(std::string_view s) {
  for (PolicyAction a : kAllPolicyActions) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

std::int64_t PolicyConfig::count_targets(PolicyAction a) const {
  return std::count_if(simple_targets.begin(), simple_targets.end(),
                       [a](const SimplePolicyTarget& t) { return t.action == a; });
}

bool PolicyConfig::targets(const InstanceRef& target) const {
  return std::any_of(simple_targets.begin(), simple_targets.end(),
                     [&](const SimplePolicyTarget& t) { return t.target == target; });
}

void InstanceSnapshot::validate() const {
  if (instance.empty()) throw ValidationError("snapshot without instance");
  if (observed_at < 0) throw ValidationError("snapshot timestamp is negative");
  if (user_count < 0 || post_count < 0 || active_month < 0 || active_halfyear < 0 ||
      followers < 0 || following < 0) {
    throw ValidationError("snapshot for " + instance.domain() + " has a negative count");
  }
  for (const auto& t : policy_config.simple_targets) {
    if (t.target.empty()) throw ValidationError("simple-policy target without domain");
  }
}

void Post::validate() const {
  if (instance.empty()) throw ValidationError("post without instance");
  if (mentions < 0 || hashtags < 0 || urls < 0 || hate_hits < 0 || reblogs_count < 0 ||
      replies_count < 0) {
    throw ValidationError("post " + post_id + " has a negative counter");
  }
}

}  // namespace fedwatch
