#include "fedwatch/crawler.hpp"

#include <netdb.h>
#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <ctime>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace fedwatch {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- config

void CrawlConfig::validate() const {
  if (cadence_seconds <= 0) throw ValidationError("cadence_seconds must be positive");
  if (per_host_min_interval_ms <= 0) throw ValidationError("per_host_min_interval_ms must be positive");
  if (max_concurrency < 1) throw ValidationError("max_concurrency must be at least 1");
  if (timeout_ms <= 0) throw ValidationError("timeout_ms must be positive");
  if (max_timeline_pages <= 0) throw ValidationError("max_timeline_pages must be positive");
  if (cadence_seconds * 1000 < per_host_min_interval_ms)
    throw ValidationError("cadence_seconds must cover per_host_min_interval_ms");
  if (!mock_base_url.empty() && mock_base_url.rfind("http://", 0) != 0 && mock_base_url.rfind("https://", 0) != 0)
    throw ValidationError("mock_base_url must start with http:// or https://");
}

std::string CrawlConfig::user_agent() const { return "fedwatch/0.1 (research crawler; contact: " + contact + ")"; }

void to_json(json& j, const CrawlConfig& c) {
  json seeds = json::array();
  for (const auto& s : c.seed_instances) seeds.push_back(s.domain());
  j = {{"seed_instances", seeds},
       {"cadence_seconds", c.cadence_seconds},
       {"per_host_min_interval_ms", c.per_host_min_interval_ms},
       {"max_concurrency", c.max_concurrency},
       {"timeout_ms", c.timeout_ms},
       {"max_timeline_pages", c.max_timeline_pages},
       {"mock_base_url", c.mock_base_url},
       {"contact", c.contact}};
}

void from_json(const json& j, CrawlConfig& c) {
  if (!j.is_object()) throw ValidationError("crawl config must be a JSON object");
  static const std::set<std::string> known = {"seed_instances",     "cadence_seconds", "per_host_min_interval_ms",
                                              "max_concurrency",    "timeout_ms",      "max_timeline_pages",
                                              "mock_base_url",      "contact"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ValidationError("unknown crawl setting '" + key + "'");
  try {
    if (j.contains("seed_instances")) {
      c.seed_instances.clear();
      for (const auto& s : j.at("seed_instances")) c.seed_instances.emplace_back(s.get<std::string>());
    }
    if (j.contains("cadence_seconds")) j.at("cadence_seconds").get_to(c.cadence_seconds);
    if (j.contains("per_host_min_interval_ms")) j.at("per_host_min_interval_ms").get_to(c.per_host_min_interval_ms);
    if (j.contains("max_concurrency")) j.at("max_concurrency").get_to(c.max_concurrency);
    if (j.contains("timeout_ms")) j.at("timeout_ms").get_to(c.timeout_ms);
    if (j.contains("max_timeline_pages")) j.at("max_timeline_pages").get_to(c.max_timeline_pages);
    if (j.contains("mock_base_url")) j.at("mock_base_url").get_to(c.mock_base_url);
    if (j.contains("contact")) j.at("contact").get_to(c.contact);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad crawl setting: ") + e.what());
  }
}

void to_json(json& j, const CrawlReport& r) {
  json outcomes = json::object();
  for (auto c : kAllFetchClasses) outcomes[std::string(to_string(c))] = r.count(c);
  json discovered = json::array();
  for (const auto& d : r.discovered) discovered.push_back(d.domain());
  json per_instance = json::object();
  for (const auto& [i, o] : r.instance_outcomes) {
    per_instance[i.domain()] = o.reason.empty() ? json(to_string(o.cls)) : json(std::string(to_string(o.cls)) + ": " + o.reason);
  }
  j = {{"observed_at", r.observed_at},       {"attempted", r.attempted},
       {"outcomes", outcomes},               {"other_reasons", r.other_reasons},
       {"snapshots_added", r.snapshots_added}, {"edges_added", r.edges_added},
       {"posts_added", r.posts_added},       {"non_compatible", r.non_compatible},
       {"discovered", discovered},         {"instances", per_instance}};
}

// ---------------------------------------------------------------- helpers

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  const std::string s(text);
  int y, mo, d, h, mi, sec;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &consumed) != 6) return std::nullopt;
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  long offset = 0;
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int oh = 0, om = 0;
    if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2) return std::nullopt;
    offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600L + om * 60L);
    pos += 6;
  } else if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  }
  if (pos != s.size()) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = sec;
  return static_cast<Timestamp>(timegm(&tm)) - offset;
}

std::optional<Post> post_from_status(const InstanceRef& instance, const json& status, const HateLexicon& lexicon) {
  if (!status.is_object()) return std::nullopt;
  if (auto acct = status.find("account"); acct != status.end() && acct->is_object()) {
    auto a = acct->find("acct");
    if (a != acct->end() && a->is_string() && a->get<std::string>().find('@') != std::string::npos) return std::nullopt;
  }
  Post p;
  p.instance = instance;
  const auto id = status.find("id");
  if (id == status.end()) return std::nullopt;
  if (id->is_string()) {
    p.post_id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    p.post_id = std::to_string(id->get<std::int64_t>());
  } else {
    return std::nullopt;
  }
  const auto created = status.find("created_at");
  if (created == status.end() || !created->is_string()) return std::nullopt;
  const auto ts = parse_iso8601(created->get<std::string>());
  if (!ts) return std::nullopt;
  p.created_at = *ts;
  const auto content = status.value("content", std::string());
  const auto tokens = tokenize_post(content);
  p.mentions = tokens.mentions;
  p.hashtags = tokens.hashtags;
  p.urls = tokens.urls;
  p.hate_hits = lexicon.empty() ? 0 : count_hate_words(tokens.tokens, lexicon);
  auto count = [&](const char* key) {
    auto it = status.find(key);
    return it != status.end() && it->is_number_integer() ? std::max<std::int64_t>(0, it->get<std::int64_t>()) : 0;
  };
  p.reblogs_count = count("reblogs_count");
  p.replies_count = count("replies_count");
  return p;
}

namespace {

FetchOutcome classify_status(int status) {
  if (status >= 200 && status < 300) return {};
  switch (status) {
    case 403: return {FetchClass::private_403, ""};
    case 404: return {FetchClass::not_found_404, ""};
    case 410: return {FetchClass::gone_410, ""};
    case 502: return {FetchClass::bad_gateway_502, ""};
    case 503: return {FetchClass::unavailable_503, ""};
    default: return {FetchClass::other, "http " + std::to_string(status)};
  }
}

FetchOutcome other(std::string reason) { return {FetchClass::other, std::move(reason)}; }

bool resolvable(const std::string& host, FetchOutcome& failure) {
  if (host.size() >= 8 && host.compare(host.size() - 8, 8, ".invalid") == 0) {
    failure = {FetchClass::non_existent_domain, ""};
    return false;
  }
  addrinfo hints{};
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = getaddrinfo(host.c_str(), "443", &hints, &res);
  if (res) freeaddrinfo(res);
  if (rc == 0) return true;
  if (rc == EAI_NONAME
#ifdef EAI_NODATA
      || rc == EAI_NODATA
#endif
  ) {
    failure = {FetchClass::non_existent_domain, ""};
  } else {
    failure = other(std::string("dns: ") + gai_strerror(rc));
  }
  return false;
}

// rel="next" target's max_id from a Link header, if any.
std::optional<std::string> next_from_link(const std::string& link) {
  std::size_t pos = 0;
  while (pos < link.size()) {
    const auto open = link.find('<', pos);
    if (open == std::string::npos) break;
    const auto close = link.find('>', open);
    if (close == std::string::npos) break;
    const auto end = link.find(',', close);
    const auto params = link.substr(close + 1, end == std::string::npos ? std::string::npos : end - close - 1);
    if (params.find("rel=\"next\"") != std::string::npos || params.find("rel=next") != std::string::npos) {
      const auto url = link.substr(open + 1, close - open - 1);
      const auto m = url.find("max_id=");
      if (m == std::string::npos) return std::nullopt;
      const auto stop = url.find('&', m);
      return url.substr(m + 7, stop == std::string::npos ? std::string::npos : stop - m - 7);
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return std::nullopt;
}

// Path (with query) of an absolute URL, or the input when it is already a path.
std::string path_of(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) return url.empty() || url[0] != '/' ? "/" + url : url;
  const auto slash = url.find('/', scheme + 3);
  return slash == std::string::npos ? "/" : url.substr(slash);
}

}  // namespace

// ---------------------------------------------------------------- HTTP

struct Crawler::HttpResult {
  FetchOutcome outcome;
  std::string body;
  std::optional<std::string> link;
};

struct HostSlot {
  std::mutex busy;
  Clock::time_point next_allowed{};
};

// Politeness and concurrency bookkeeping shared by all fetches.
struct Crawler::Gates {
  explicit Gates(int concurrency) : in_flight(concurrency) {}
  std::counting_semaphore<1 << 16> in_flight;
  std::mutex slots_mutex;
  std::map<std::string, std::unique_ptr<HostSlot>> slots;
};

Crawler::Crawler(CrawlConfig config, HateLexicon lexicon) : config_(std::move(config)), lexicon_(std::move(lexicon)) {
  config_.validate();
  gates_ = std::make_unique<Gates>(config_.max_concurrency);
}

Crawler::~Crawler() = default;

Crawler::HttpResult Crawler::get(const InstanceRef& instance, const std::string& target) {
  const std::string& host = instance.domain();
  HttpResult out;
  if (config_.mock_base_url.empty()) {
    if (!resolvable(host, out.outcome)) return out;
  } else if (host.size() >= 8 && host.compare(host.size() - 8, 8, ".invalid") == 0) {
    out.outcome = {FetchClass::non_existent_domain, ""};
    return out;
  }

  Gates& shared = *gates_;
  HostSlot* slot;
  {
    std::lock_guard lock(shared.slots_mutex);
    auto& s = shared.slots[host];
    if (!s) s = std::make_unique<HostSlot>();
    slot = s.get();
  }
  std::lock_guard host_lock(slot->busy);
  std::this_thread::sleep_until(slot->next_allowed);

  shared.in_flight.acquire();
  const auto started = Clock::now();
  httplib::Result res = [&] {
    auto client = config_.mock_base_url.empty() ? httplib::Client("https://" + host)
                                                 : httplib::Client(config_.mock_base_url);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers{{"User-Agent", config_.user_agent()}, {"Accept", "application/json"}};
    if (!config_.mock_base_url.empty()) headers.emplace("Host", host);
    return client.Get(target, headers);
  }();
  const auto elapsed = Clock::now() - started;
  shared.in_flight.release();
  slot->next_allowed = Clock::now() + std::chrono::milliseconds(config_.per_host_min_interval_ms);

  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read &&
                            elapsed >= std::chrono::milliseconds(config_.timeout_ms) * 9 / 10);
    out.outcome = timed_out ? other("timeout") : other("transport: " + httplib::to_string(err));
    return out;
  }
  out.outcome = classify_status(res->status);
  if (!out.outcome.ok()) return out;
  out.body = res->body;
  if (res->has_header("Link")) out.link = res->get_header_value("Link");
  return out;
}

// ---------------------------------------------------------------- fetches

Fetched<std::set<InstanceRef>> Crawler::fetch_peers(const InstanceRef& instance) {
  auto r = get(instance, "/api/v1/instance/peers");
  if (!r.outcome.ok()) return {r.outcome, std::nullopt};
  const json body = json::parse(r.body, nullptr, false);
  if (!body.is_array()) return {other("malformed peers body"), std::nullopt};
  std::set<InstanceRef> peers;
  for (const auto& entry : body) {
    if (!entry.is_string()) continue;
    const auto domain = entry.get<std::string>();
    if (!InstanceRef::is_valid_domain(domain)) continue;
    InstanceRef ref(domain);
    if (ref != instance) peers.insert(std::move(ref));
  }
  return {{}, std::move(peers)};
}

Fetched<MetadataDocument> Crawler::fetch_metadata(const InstanceRef& instance) {
  auto r = get(instance, "/api/v1/instance");
  if (!r.outcome.ok()) return {r.outcome, std::nullopt};
  if (!json::parse(r.body, nullptr, false).is_object()) return {other("malformed metadata body"), std::nullopt};
  MetadataDocument doc;
  doc.instance_body = std::move(r.body);

  auto discovery = get(instance, "/.well-known/nodeinfo");
  if (discovery.outcome.ok()) {
    const json links = json::parse(discovery.body, nullptr, false);
    std::string best_rel, best_href;
    if (links.is_object() && links.contains("links") && links["links"].is_array()) {
      for (const auto& l : links["links"]) {
        if (!l.is_object() || !l.contains("href") || !l["href"].is_string()) continue;
        const auto rel = l.value("rel", std::string());
        if (rel.find("nodeinfo") == std::string::npos) continue;
        if (best_href.empty() || rel > best_rel) {
          best_rel = rel;
          best_href = l["href"].get<std::string>();
        }
      }
    }
    if (!best_href.empty()) {
      auto ni = get(instance, path_of(best_href));
      if (ni.outcome.ok() && json::parse(ni.body, nullptr, false).is_object()) doc.nodeinfo_body = std::move(ni.body);
    }
  }
  return {{}, std::move(doc)};
}

Fetched<TimelinePage> Crawler::fetch_timeline_page(const InstanceRef& instance,
                                                   const std::optional<std::string>& cursor) {
  std::string target = "/api/v1/timelines/public?local=true&limit=" + std::to_string(kTimelinePageLimit);
  if (cursor) target += "&max_id=" + *cursor;
  auto r = get(instance, target);
  if (!r.outcome.ok()) return {r.outcome, std::nullopt};
  json body = json::parse(r.body, nullptr, false);
  if (!body.is_array()) return {other("malformed timeline body"), std::nullopt};

  TimelinePage page;
  if (r.link) {
    page.next_cursor = next_from_link(*r.link);
  } else if (body.size() >= static_cast<std::size_t>(kTimelinePageLimit)) {
    const auto& last = body.back();
    if (last.is_object() && last.contains("id")) {
      page.next_cursor = last["id"].is_string() ? last["id"].get<std::string>() : last["id"].dump();
    }
  }
  for (auto& status : body) {
    if (!status.is_object()) continue;
    const auto acct = status.contains("account") && status["account"].is_object()
                          ? status["account"].value("acct", std::string())
                          : std::string();
    if (acct.find('@') != std::string::npos) continue;
    page.posts.push_back(std::move(status));
  }
  return {{}, std::move(page)};
}

// ---------------------------------------------------------------- cycle

namespace {

struct InstanceResult {
  InstanceRef instance;
  FetchOutcome outcome;
  bool non_compatible = false;
  std::optional<InstanceSnapshot> snapshot;
  std::optional<std::set<InstanceRef>> peers;
  std::vector<Post> posts;
};

}  // namespace

CrawlReport Crawler::crawl_cycle(Store& store, Timestamp now) {
  std::set<InstanceRef> known(config_.seed_instances.begin(), config_.seed_instances.end());
  for (const auto& i : store.instances()) known.insert(i);
  for (const auto& e : store.edges()) known.insert(e.target);
  std::set<InstanceRef> had_ok;
  for (const auto& s : store.snapshots())
    if (s.fetch_status.ok()) had_ok.insert(s.instance);

  std::vector<InstanceRef> attempts;
  for (const auto& i : known)
    if (!non_compatible_.contains(i)) attempts.push_back(i);

  std::vector<InstanceResult> results(attempts.size());
  auto process = [&](std::size_t k) {
    InstanceResult& r = results[k];
    r.instance = attempts[k];
    auto failed_snapshot = [&](const FetchOutcome& outcome) {
      r.outcome = outcome;
      InstanceSnapshot s;
      s.instance = r.instance;
      s.observed_at = now;
      s.fetch_status = outcome;
      s.policy_config = PolicyConfig::unexposed();
      r.snapshot = s;
    };

    auto meta = fetch_metadata(r.instance);
    if (!meta.ok()) return failed_snapshot(meta.outcome);
    ParsedMetadata parsed;
    try {
      parsed = parse_metadata(*meta.value);
    } catch (const Error& e) {
      return failed_snapshot(other(std::string("malformed metadata: ") + e.what()));
    }
    if (!parsed.pleroma_compatible()) {
      r.non_compatible = true;
      return;
    }
    auto peers = fetch_peers(r.instance);
    if (!peers.ok()) return failed_snapshot(peers.outcome);
    r.peers = std::move(peers.value);

    InstanceSnapshot s;
    s.instance = r.instance;
    s.observed_at = now;
    s.user_count = parsed.user_count;
    s.post_count = parsed.post_count;
    s.active_month = parsed.active_month;
    s.active_halfyear = parsed.active_halfyear;
    s.version = parsed.version;
    s.staff_exposed = parsed.staff_exposed;
    s.admins = parsed.admins;
    s.moderators = parsed.moderators;
    s.policy_config = parsed.policy;

    std::map<std::string, std::pair<std::int64_t, std::int64_t>> authors;
    std::optional<std::string> cursor;
    for (int page = 0; page < config_.max_timeline_pages; ++page) {
      auto tl = fetch_timeline_page(r.instance, cursor);
      if (!tl.ok()) {
        if (page == 0) r.outcome = tl.outcome;
        break;
      }
      for (const auto& status : tl.value->posts) {
        if (auto post = post_from_status(r.instance, status, lexicon_)) r.posts.push_back(std::move(*post));
        if (status.contains("account") && status["account"].is_object()) {
          const auto& a = status["account"];
          const auto key = a.value("acct", std::string());
          if (key.empty()) continue;
          auto num = [&](const char* f) {
            return a.contains(f) && a[f].is_number_integer() ? std::max<std::int64_t>(0, a[f].get<std::int64_t>()) : 0;
          };
          authors[key] = {num("followers_count"), num("following_count")};
        }
      }
      cursor = tl.value->next_cursor;
      if (!cursor) break;
    }
    for (const auto& [_, f] : authors) {
      s.followers += f.first;
      s.following += f.second;
    }
    r.snapshot = std::move(s);
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_concurrency), std::max<std::size_t>(attempts.size(), 1));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < attempts.size(); k = next++) process(k);
    });
  for (auto& t : pool) t.join();

  CrawlReport report;
  report.observed_at = now;
  report.attempted = attempts.size();
  std::set<InstanceRef> discovered;
  for (auto& r : results) {
    report.outcomes[r.outcome.cls]++;
    report.instance_outcomes[r.instance] = r.outcome;
    if (r.outcome.cls == FetchClass::other) report.other_reasons[r.outcome.reason]++;
    if (r.non_compatible) {
      ++report.non_compatible;
      non_compatible_.insert(r.instance);
      continue;
    }
    if (r.peers) {
      auto edges = store.diff_edges(r.instance, store.known_peers(r.instance), *r.peers, now);
      for (auto& e : edges) {
        e.pre_window = !had_ok.contains(r.instance);
        if (!known.contains(e.target)) discovered.insert(e.target);
      }
      report.edges_added += store.append_edges(edges);
    }
    if (r.snapshot && store.append_snapshot(*r.snapshot) == Ack::appended) ++report.snapshots_added;
    for (const auto& p : r.posts)
      if (store.append_post(p) == Ack::appended) ++report.posts_added;
  }
  report.discovered.assign(discovered.begin(), discovered.end());
  spdlog::info("crawl cycle at {}: {} attempted, {} ok, {} snapshots, {} edges, {} posts, {} discovered", now,
               report.attempted, report.count(FetchClass::ok), report.snapshots_added, report.edges_added,
               report.posts_added, report.discovered.size());
  return report;
}

}  // namespace fedwatch
