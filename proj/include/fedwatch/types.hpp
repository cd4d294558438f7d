#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedwatch {

using Timestamp = std::int64_t;  // Unix seconds, UTC

inline constexpr Timestamp kSecondsPerDay = 86400;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Lowercase DNS name identifying one instance.
class InstanceRef {
 public:
  InstanceRef() = default;
  /// Lowercases and validates; throws ValidationError on schemes, paths or bad characters.
  explicit InstanceRef(std::string_view domain);

  const std::string& domain() const { return domain_; }
  bool empty() const { return domain_.empty(); }

  static bool is_valid_domain(std::string_view domain);

  auto operator<=>(const InstanceRef&) const = default;

 private:
  std::string domain_;
};

enum class FetchClass {
  ok,
  non_existent_domain,
  not_found_404,
  private_403,
  bad_gateway_502,
  unavailable_503,
  gone_410,
  other,
};

inline constexpr FetchClass kAllFetchClasses[] = {
    FetchClass::ok,          FetchClass::non_existent_domain, FetchClass::not_found_404,
    FetchClass::private_403, FetchClass::bad_gateway_502,     FetchClass::unavailable_503,
    FetchClass::gone_410,    FetchClass::other,
};

std::string_view to_string(FetchClass c);
FetchClass fetch_class_from_string(std::string_view s);

struct FetchOutcome {
  FetchClass cls = FetchClass::ok;
  std::string reason;  // diagnostic for `other` (e.g. "timeout", "malformed body")

  bool ok() const { return cls == FetchClass::ok; }
  bool operator==(const FetchOutcome&) const = default;
};

enum class PolicyAction {
  reject,
  accept,
  nsfw,
  media_removal,
  federated_timeline_removal,
  quarantine,
  reject_deletes,
  report_removal,
  avatar_removal,
  banner_removal,
  followers_only,
};

inline constexpr PolicyAction kAllPolicyActions[] = {
    PolicyAction::reject,         PolicyAction::accept,
    PolicyAction::nsfw,           PolicyAction::media_removal,
    PolicyAction::federated_timeline_removal, PolicyAction::quarantine,
    PolicyAction::reject_deletes, PolicyAction::report_removal,
    PolicyAction::avatar_removal, PolicyAction::banner_removal,
    PolicyAction::followers_only,
};

std::string_view to_string(PolicyAction a);
std::optional<PolicyAction> policy_action_from_string(std::string_view s);

struct SimplePolicyTarget {
  PolicyAction action = PolicyAction::reject;
  InstanceRef target;

  auto operator<=>(const SimplePolicyTarget&) const = default;
};

struct HashtagRuleCounts {
  std::int64_t federated_timeline_removal = 0;
  std::int64_t reject = 0;
  std::int64_t sensitive = 0;

  bool operator==(const HashtagRuleCounts&) const = default;
};

struct PolicyConfig {
  bool exposed = true;  // false when the instance does not publish its MRF section
  std::set<std::string> enabled_policies;
  std::vector<SimplePolicyTarget> simple_targets;
  // Simple-policy keys outside the closed action enum, kept verbatim.
  std::map<std::string, std::vector<std::string>> other_actions;
  HashtagRuleCounts hashtag_rules;

  static PolicyConfig unexposed() {
    PolicyConfig c;
    c.exposed = false;
    return c;
  }

  std::int64_t count_targets(PolicyAction a) const;
  bool targets(const InstanceRef& target) const;

  bool operator==(const PolicyConfig&) const = default;
};

struct InstanceSnapshot {
  InstanceRef instance;
  Timestamp observed_at = 0;
  std::int64_t user_count = 0;
  std::int64_t post_count = 0;
  std::int64_t active_month = 0;
  std::int64_t active_halfyear = 0;
  std::int64_t followers = 0;
  std::int64_t following = 0;
  std::string version;
  bool staff_exposed = true;
  std::set<std::string> admins;
  std::set<std::string> moderators;
  PolicyConfig policy_config;
  FetchOutcome fetch_status;

  /// Throws ValidationError when an invariant of the record is broken.
  void validate() const;

  bool operator==(const InstanceSnapshot&) const = default;
};

struct FederationEdge {
  InstanceRef source;
  InstanceRef target;
  Timestamp first_seen = 0;
  bool pre_window = false;

  bool operator==(const FederationEdge&) const = default;
};

/// Derived counters for one local post. The post body is never kept.
struct Post {
  InstanceRef instance;
  std::string post_id;
  Timestamp created_at = 0;
  std::int64_t mentions = 0;
  std::int64_t hashtags = 0;
  std::int64_t urls = 0;
  std::int64_t hate_hits = 0;
  std::int64_t reblogs_count = 0;
  std::int64_t replies_count = 0;

  void validate() const;

  bool operator==(const Post&) const = default;
};

}  // namespace fedwatch
