#include <doctest.h>

#include <algorithm>
#include <map>

#include "fedwatch/crawler.hpp"
#include "fedwatch/mock_server.hpp"
#include "test_util.hpp"

using namespace fedwatch;
using nlohmann::json;

namespace {

MockWorld world() { return MockWorld::load(testing::fixture("crawl/world.json")); }

CrawlConfig config_for(const MockServer& server, std::vector<std::string> seeds = {}) {
  CrawlConfig c;
  for (auto& s : seeds) c.seed_instances.emplace_back(s);
  c.per_host_min_interval_ms = 100;
  c.max_concurrency = 4;
  c.timeout_ms = 400;
  c.max_timeline_pages = 5;
  c.mock_base_url = server.base_url();
  c.contact = "ops@example.org";
  return c;
}

std::vector<std::string> seeds_of(const MockWorld& w) { return w.expected.at("seeds").get<std::vector<std::string>>(); }

std::set<std::string> domains(const std::set<InstanceRef>& refs) {
  std::set<std::string> out;
  for (const auto& r : refs) out.insert(r.domain());
  return out;
}

MockInstance pleroma_instance(std::vector<std::string> peers) {
  MockInstance m;
  m.instance = {{"version", "2.7.2 (compatible; Pleroma 2.4.3)"},
                {"stats", {{"user_count", 3}, {"status_count", 9}}},
                {"pleroma", {{"metadata", {{"federation", {{"mrf_policies", {"NoOpPolicy"}}}}}}}}};
  m.peers = peers;
  return m;
}

}  // namespace

TEST_CASE("fetch_peers lowercases and deduplicates") {
  MockServer server(world());
  MockWorld extra;
  extra.instances["fold.example"] = pleroma_instance({"A.example", "a.example", "b.example"});
  server.set_instance("fold.example", extra.instances["fold.example"]);
  Crawler crawler(config_for(server));

  auto got = crawler.fetch_peers(InstanceRef("fold.example"));
  REQUIRE(got.ok());
  CHECK(domains(*got.value) == std::set<std::string>{"a.example", "b.example"});

  // The fixture's own list also repeats a domain in other case and names itself.
  auto alpha = crawler.fetch_peers(InstanceRef("alpha.example"));
  REQUIRE(alpha.ok());
  const auto want = world().expected.at("alpha_peers").get<std::set<std::string>>();
  CHECK(domains(*alpha.value) == want);
}

TEST_CASE("fetch failures map onto the status taxonomy") {
  MockServer server(world());
  Crawler crawler(config_for(server));

  CHECK(crawler.fetch_peers(InstanceRef("gamma.example")).outcome.cls == FetchClass::not_found_404);
  CHECK(crawler.fetch_peers(InstanceRef("nxd.invalid")).outcome.cls == FetchClass::non_existent_domain);
  CHECK(crawler.fetch_metadata(InstanceRef("epsilon.example")).outcome.cls == FetchClass::unavailable_503);
  CHECK(crawler.fetch_metadata(InstanceRef("delta.example")).outcome.cls == FetchClass::bad_gateway_502);
  CHECK(crawler.fetch_metadata(InstanceRef("zeta.example")).outcome.cls == FetchClass::gone_410);
  CHECK(crawler.fetch_timeline_page(InstanceRef("beta.example")).outcome.cls == FetchClass::private_403);

  auto broken = crawler.fetch_peers(InstanceRef("broken.example"));
  CHECK(broken.outcome.cls == FetchClass::other);
  CHECK(broken.outcome.reason.find("malformed") != std::string::npos);
  CHECK_FALSE(broken.value.has_value());
}

TEST_CASE("an unresolvable domain is classified without a mock") {
  CrawlConfig c;
  c.timeout_ms = 500;
  Crawler crawler(c);
  CHECK(crawler.fetch_peers(InstanceRef("nowhere.invalid")).outcome.cls == FetchClass::non_existent_domain);
}

TEST_CASE("a response slower than timeout_ms is class other with reason timeout") {
  MockServer server(world());
  Crawler crawler(config_for(server));
  auto got = crawler.fetch_metadata(InstanceRef("slow.example"));
  CHECK(got.outcome.cls == FetchClass::other);
  CHECK(got.outcome.reason == "timeout");
}

TEST_CASE("fetch_metadata returns the instance document byte for byte") {
  const auto w = world();
  MockServer server(w);
  Crawler crawler(config_for(server));
  auto got = crawler.fetch_metadata(InstanceRef("alpha.example"));
  REQUIRE(got.ok());
  CHECK(got.value->instance_body == w.instances.at("alpha.example").instance.dump());
  REQUIRE(got.value->nodeinfo_body.has_value());
  CHECK(*got.value->nodeinfo_body == w.instances.at("alpha.example").nodeinfo->dump());
}

TEST_CASE("three timeline pages drain every local post") {
  const auto w = world();
  MockServer server(w);
  Crawler crawler(config_for(server));
  const InstanceRef alpha("alpha.example");

  std::vector<std::string> ids;
  std::optional<std::string> cursor;
  int calls = 0;
  do {
    auto page = crawler.fetch_timeline_page(alpha, cursor);
    REQUIRE(page.ok());
    ++calls;
    for (const auto& p : page.value->posts) {
      CHECK(p.at("account").at("acct").get<std::string>().find('@') == std::string::npos);
      ids.push_back(p.at("id").get<std::string>());
    }
    cursor = page.value->next_cursor;
  } while (cursor && calls < 10);

  CHECK(calls == w.expected.at("alpha_timeline_calls").get<int>());
  CHECK_FALSE(cursor.has_value());
  CHECK(ids.size() == w.expected.at("alpha_local_posts").get<std::size_t>());
  CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ids.size());

  // Paths go out exactly as documented.
  std::vector<std::string> targets;
  for (const auto& r : server.requests()) targets.push_back(r.target);
  REQUIRE(targets.size() == 3);
  CHECK(targets[0] == "/api/v1/timelines/public?local=true&limit=40");
  CHECK(targets[1].rfind("/api/v1/timelines/public?local=true&limit=40&max_id=", 0) == 0);
  CHECK(targets[2].rfind("/api/v1/timelines/public?local=true&limit=40&max_id=", 0) == 0);
}

TEST_CASE("an empty timeline yields no posts and no cursor") {
  MockServer server(world());
  Crawler crawler(config_for(server));
  auto page = crawler.fetch_timeline_page(InstanceRef("eta.example"));
  REQUIRE(page.ok());
  CHECK(page.value->posts.empty());
  CHECK_FALSE(page.value->next_cursor.has_value());
}

TEST_CASE("a crawl cycle assigns every fixture instance its designed class") {
  const auto w = world();
  MockServer server(w);
  Crawler crawler(config_for(server, seeds_of(w)));
  auto store = Store::in_memory();
  const Timestamp t0 = 1'640'000'000;

  const auto report = crawler.crawl_cycle(store, t0);
  const auto expected = w.expected.at("classes").get<std::map<std::string, std::string>>();
  CHECK(report.attempted == expected.size());
  REQUIRE(report.instance_outcomes.size() == expected.size());
  std::map<std::string, std::size_t> want_counts;
  for (const auto& [domain, cls] : expected) {
    CAPTURE(domain);
    CHECK(to_string(report.instance_outcomes.at(InstanceRef(domain)).cls) == cls);
    want_counts[cls]++;
  }
  for (auto c : kAllFetchClasses) {
    CAPTURE(to_string(c));
    CHECK(report.count(c) == want_counts[std::string(to_string(c))]);
  }
  CHECK(report.other_reasons.at("timeout") == 1);
  CHECK(report.non_compatible == 1);

  // alpha lists four distinct peers; beta serves its peer list before its
  // timeline refuses, so it contributes one. All first seen now, pre-window.
  CHECK(report.edges_added == 5);
  std::map<std::string, std::size_t> by_source;
  for (const auto& e : store.edges()) {
    by_source[e.source.domain()]++;
    CHECK(e.first_seen == t0);
    CHECK(e.pre_window);
  }
  CHECK(by_source == std::map<std::string, std::size_t>{{"alpha.example", 4}, {"beta.example", 1}});
  std::size_t alpha_posts = 0;
  for (const auto& p : store.posts()) alpha_posts += p.instance.domain() == "alpha.example";
  CHECK(alpha_posts == w.expected.at("alpha_local_posts").get<std::size_t>());

  // Every Pleroma attempt leaves one snapshot; the Mastodon instance leaves none.
  CHECK(report.snapshots_added == expected.size() - 1);
  CHECK_FALSE(store.has_snapshot(InstanceRef("masto.example")));
  for (const auto& s : store.snapshots()) {
    if (s.instance.domain() == "alpha.example") {
      CHECK(s.fetch_status.ok());
      CHECK(s.user_count == 40);
      CHECK(s.policy_config.exposed);
    }
    if (s.instance.domain() == "gamma.example") CHECK(s.fetch_status.cls == FetchClass::not_found_404);
  }
}

TEST_CASE("three instances with one 404 report ok 2 and not_found 1") {
  MockServer server(world());
  Crawler crawler(config_for(server, {"alpha.example", "eta.example", "gamma.example"}));
  auto store = Store::in_memory();
  const auto report = crawler.crawl_cycle(store, 1'640'000'000);
  CHECK(report.attempted == 3);
  CHECK(report.count(FetchClass::ok) == 2);
  CHECK(report.count(FetchClass::not_found_404) == 1);
  std::size_t total = 0;
  for (const auto& [_, n] : report.outcomes) total += n;
  CHECK(total == 3);
}

TEST_CASE("newly listed peers are attempted in the next cycle") {
  MockServer server(world());
  Crawler crawler(config_for(server, {"alpha.example"}));
  auto store = Store::in_memory();

  const auto first = crawler.crawl_cycle(store, 1'640'000'000);
  CHECK(first.attempted == 1);
  std::vector<std::string> found;
  for (const auto& d : first.discovered) found.push_back(d.domain());
  CHECK(found == std::vector<std::string>{"beta.example", "gamma.example", "masto.example", "newpeer.example"});

  const auto second = crawler.crawl_cycle(store, 1'640'014'400);
  CHECK(second.instance_outcomes.contains(InstanceRef("newpeer.example")));
  CHECK(second.instance_outcomes.at(InstanceRef("newpeer.example")).ok());
  CHECK(second.attempted == 5);
  // masto.example turned out not to be Pleroma; later cycles skip it.
  const auto third = crawler.crawl_cycle(store, 1'640'028'800);
  CHECK_FALSE(third.instance_outcomes.contains(InstanceRef("masto.example")));
  CHECK(third.attempted == 4);
}

TEST_CASE("an unchanged world adds no edges on the second cycle") {
  MockWorld w;
  w.instances["one.example"] = pleroma_instance({"two.example"});
  w.instances["two.example"] = pleroma_instance({"one.example", "ONE.example"});
  MockServer server(w);
  Crawler crawler(config_for(server, {"one.example", "two.example"}));
  auto store = Store::in_memory();
  CHECK(crawler.crawl_cycle(store, 1'640'000'000).edges_added == 2);
  const auto again = crawler.crawl_cycle(store, 1'640'014'400);
  CHECK(again.edges_added == 0);
  CHECK(again.snapshots_added == 2);
  CHECK(store.edges().size() == 2);
}

TEST_CASE("a peer appearing after the first snapshot is in-window") {
  MockWorld w;
  w.instances["one.example"] = pleroma_instance({"two.example"});
  w.instances["two.example"] = pleroma_instance({});
  MockServer server(w);
  Crawler crawler(config_for(server, {"one.example"}));
  auto store = Store::in_memory();
  crawler.crawl_cycle(store, 1'640'000'000);
  server.set_instance("one.example", pleroma_instance({"two.example", "three.example"}));
  crawler.crawl_cycle(store, 1'640'014'400);

  std::map<std::string, FederationEdge> by_target;
  for (const auto& e : store.edges())
    if (e.source.domain() == "one.example") by_target.emplace(e.target.domain(), e);
  REQUIRE(by_target.size() == 2);
  CHECK(by_target.at("two.example").pre_window);
  CHECK_FALSE(by_target.at("three.example").pre_window);
  CHECK(by_target.at("three.example").first_seen == 1'640'014'400);
}

TEST_CASE("requests respect per-host spacing and the concurrency bound") {
  const auto w = world();
  MockServer server(w);
  auto cfg = config_for(server, seeds_of(w));
  cfg.max_concurrency = 2;
  cfg.per_host_min_interval_ms = 150;
  Crawler crawler(cfg);
  auto store = Store::in_memory();
  crawler.crawl_cycle(store, 1'640'000'000);

  const auto log = server.requests();
  REQUIRE(log.size() >= 10);
  CHECK(server.max_in_flight() <= 2);

  std::map<std::string, std::vector<MockRequest>> by_host;
  for (const auto& r : log) by_host[r.host].push_back(r);
  std::size_t pairs = 0;
  for (auto& [host, reqs] : by_host) {
    std::sort(reqs.begin(), reqs.end(), [](const auto& a, const auto& b) { return a.received < b.received; });
    for (std::size_t k = 1; k < reqs.size(); ++k) {
      CAPTURE(host);
      CHECK(reqs[k].received - reqs[k - 1].finished >= std::chrono::milliseconds(150));
      ++pairs;
    }
  }
  CHECK(pairs >= 6);
  for (const auto& r : log) CHECK(r.user_agent.find("contact: ops@example.org") != std::string::npos);
}

TEST_CASE("crawl config validation and JSON round trip") {
  CrawlConfig c;
  c.seed_instances = {InstanceRef("a.example")};
  c.max_concurrency = 3;
  json j = c;
  CrawlConfig back = j.get<CrawlConfig>();
  CHECK(json(back) == j);

  c.max_concurrency = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.max_concurrency = 1;
  c.cadence_seconds = 1;
  c.per_host_min_interval_ms = 5000;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_THROWS_AS(json({{"bogus", 1}}).get<CrawlConfig>(), ValidationError);
}

TEST_CASE("parse_iso8601") {
  // 2021-01-05 is 4 days after 2021-01-01 (1609459200).
  CHECK(parse_iso8601("2021-01-05T10:00:00.000Z") == 1609459200 + 4 * 86400 + 10 * 3600);
  CHECK(parse_iso8601("2021-01-05T10:00:00Z") == 1609459200 + 4 * 86400 + 10 * 3600);
  CHECK(parse_iso8601("2021-01-05T10:00:00+02:00") == 1609459200 + 4 * 86400 + 8 * 3600);
  CHECK_FALSE(parse_iso8601("yesterday").has_value());
  CHECK_FALSE(parse_iso8601("2021-13-05T10:00:00Z").has_value());
}

TEST_CASE("post_from_status extracts counters from local posts") {
  const HateLexicon lexicon({"slur01"});
  const InstanceRef inst("alpha.example");
  json status = {{"id", "42"},
                 {"created_at", "2021-01-05T10:00:00.000Z"},
                 {"content", "<p>hey @bob and @carol@x.example slur01 #a #b https://x.example/1</p>"},
                 {"account", {{"acct", "dave"}}},
                 {"reblogs_count", 3},
                 {"replies_count", 1}};
  auto p = post_from_status(inst, status, lexicon);
  REQUIRE(p.has_value());
  CHECK(p->post_id == "42");
  CHECK(p->mentions == 2);
  CHECK(p->hashtags == 2);
  CHECK(p->urls == 1);
  CHECK(p->hate_hits == 1);
  CHECK(p->reblogs_count == 3);
  CHECK(p->replies_count == 1);

  status["account"]["acct"] = "dave@remote.example";
  CHECK_FALSE(post_from_status(inst, status, lexicon).has_value());
  status["account"]["acct"] = "dave";
  status["created_at"] = "soon";
  CHECK_FALSE(post_from_status(inst, status, lexicon).has_value());
}
