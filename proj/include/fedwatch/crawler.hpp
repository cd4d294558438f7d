#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedwatch/policy.hpp"
#include "fedwatch/store.hpp"
#include "fedwatch/text.hpp"
#include "fedwatch/types.hpp"

namespace fedwatch {

inline constexpr int kTimelinePageLimit = 40;

struct CrawlConfig {
  std::vector<InstanceRef> seed_instances;
  Timestamp cadence_seconds = 14400;
  int per_host_min_interval_ms = 1000;
  int max_concurrency = 8;
  int timeout_ms = 10000;
  int max_timeline_pages = 5;
  // When set (e.g. "http://127.0.0.1:8080"), every request goes there and
  // the instance travels in the Host header.
  std::string mock_base_url;
  std::string contact = "unset";  // appended to the User-Agent

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
  std::string user_agent() const;
};

void to_json(nlohmann::json& j, const CrawlConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, CrawlConfig& c);

/// Either a value or the classified reason it could not be fetched.
template <typename T>
struct Fetched {
  FetchOutcome outcome;
  std::optional<T> value;

  bool ok() const { return outcome.ok(); }
};

struct TimelinePage {
  std::vector<nlohmann::json> posts;  // local posts only, as returned
  std::optional<std::string> next_cursor;
};

struct CrawlReport {
  Timestamp observed_at = 0;
  std::size_t attempted = 0;
  std::map<FetchClass, std::size_t> outcomes;  // one class per attempted instance
  std::map<std::string, std::size_t> other_reasons;
  std::map<InstanceRef, FetchOutcome> instance_outcomes;
  std::size_t snapshots_added = 0;
  std::size_t edges_added = 0;
  std::size_t posts_added = 0;
  std::size_t non_compatible = 0;
  std::vector<InstanceRef> discovered;  // first seen this cycle; attempted next cycle

  std::size_t count(FetchClass c) const {
    auto it = outcomes.find(c);
    return it == outcomes.end() ? 0 : it->second;
  }
};

void to_json(nlohmann::json& j, const CrawlReport& r);

/// Fetches the public API of Pleroma-compatible instances. Requests to one
/// host are serialized and spaced by per_host_min_interval_ms, measured
/// from the end of the previous request; at most max_concurrency requests
/// are in flight. Failures are classified, never thrown.
class Crawler {
 public:
  explicit Crawler(CrawlConfig config, HateLexicon lexicon = {});
  ~Crawler();
  Crawler(const Crawler&) = delete;
  Crawler& operator=(const Crawler&) = delete;

  Fetched<std::set<InstanceRef>> fetch_peers(const InstanceRef& instance);
  /// /api/v1/instance verbatim plus the nodeinfo document when discoverable.
  Fetched<MetadataDocument> fetch_metadata(const InstanceRef& instance);
  Fetched<TimelinePage> fetch_timeline_page(const InstanceRef& instance,
                                            const std::optional<std::string>& cursor = std::nullopt);

  /// Attempts every known instance once: seeds, instances already in the
  /// store and every edge target, except ones found not to be
  /// Pleroma-compatible by this crawler. The instance's class is that of the
  /// first failing fetch among metadata, peers and the first timeline page.
  CrawlReport crawl_cycle(Store& store, Timestamp now);

  const CrawlConfig& config() const { return config_; }

 private:
  struct HttpResult;
  struct Gates;
  HttpResult get(const InstanceRef& instance, const std::string& target);

  CrawlConfig config_;
  HateLexicon lexicon_;
  std::unique_ptr<Gates> gates_;
  std::set<InstanceRef> non_compatible_;
};

/// Mastodon-API status JSON to store counters. Returns nullopt for posts
/// that are not local or lack an id or a parseable created_at.
std::optional<Post> post_from_status(const InstanceRef& instance, const nlohmann::json& status,
                                     const HateLexicon& lexicon);

/// "2021-01-05T10:00:00.000Z" -> Unix seconds.
std::optional<Timestamp> parse_iso8601(std::string_view text);

}  // namespace fedwatch
