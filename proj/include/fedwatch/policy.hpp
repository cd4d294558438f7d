#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "fedwatch/types.hpp"

namespace fedwatch {

/// Verbatim bodies fetched for one instance: /api/v1/instance plus the
/// nodeinfo document when discovery succeeded.
struct MetadataDocument {
  std::string instance_body;
  std::optional<std::string> nodeinfo_body;

  bool operator==(const MetadataDocument&) const = default;
};

class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// "Pleroma.Web.ActivityPub.MRF.SimplePolicy" -> "SimplePolicy".
std::string strip_policy_namespace(std::string_view name);

/// Throws ParseError naming the offending JSON path. A document without
/// any MRF section yields PolicyConfig::unexposed().
PolicyConfig parse_policies(const MetadataDocument& document);

struct ParsedMetadata {
  std::string software;  // lowercase, e.g. "pleroma"
  std::string version;
  std::int64_t user_count = 0;
  std::int64_t post_count = 0;
  std::int64_t active_month = 0;
  std::int64_t active_halfyear = 0;
  bool staff_exposed = false;
  std::set<std::string> admins;
  std::set<std::string> moderators;
  PolicyConfig policy;

  /// Pleroma and its forks expose the MRF surface this toolkit reads.
  bool pleroma_compatible() const;
};

ParsedMetadata parse_metadata(const MetadataDocument& document);

using VersionTriple = std::array<int, 3>;

/// Accepts "2.4.0", "2.4.0-12-gabc", "2.7.2 (compatible; Pleroma 2.4.3)".
/// For the compatibility form the Pleroma version wins.
std::optional<VersionTriple> parse_version(std::string_view version);

inline constexpr VersionTriple kDefaultsThresholdVersion{2, 3, 0};

/// Policies enabled on a fresh install of the given version.
const std::set<std::string>& default_policies(const VersionTriple& version);

/// Unparseable versions fall back to the post-2.3.0 defaults (logged).
bool classify_default(std::string_view policy_name, std::string_view version);

/// Throws Error for an unexposed config.
bool default_only(const PolicyConfig& config, std::string_view version);

}  // namespace fedwatch
