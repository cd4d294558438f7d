#include <doctest.h>

#include "fedwatch/codec.hpp"
#include "fedwatch/store.hpp"
#include "test_util.hpp"

using namespace fedwatch;
using fedwatch::testing::make_snapshot;
using fedwatch::testing::read_file;
using fedwatch::testing::TempDir;

namespace {

InstanceSnapshot rich_snapshot(Timestamp at) {
  auto s = make_snapshot("Poa.Example", at, 1234, 56789);
  s.active_month = 40;
  s.active_halfyear = 77;
  s.followers = 9;
  s.following = 11;
  s.admins = {"https://poa.example/users/root"};
  s.moderators = {"https://poa.example/users/root", "https://poa.example/users/mod"};
  s.policy_config.enabled_policies = {"SimplePolicy", "ObjectAgePolicy"};
  s.policy_config.simple_targets = {{PolicyAction::reject, InstanceRef("gab.com")},
                                    {PolicyAction::quarantine, InstanceRef("bad.example")}};
  s.policy_config.other_actions["silence"] = {"x.example"};
  s.policy_config.hashtag_rules = {1, 2, 3};
  return s;
}

}  // namespace

TEST_CASE("InstanceRef lowercases and rejects schemes and paths") {
  CHECK(InstanceRef("A.Example").domain() == "a.example");
  CHECK_THROWS_AS(InstanceRef(""), ValidationError);
  CHECK_THROWS_AS(InstanceRef("https://a.example"), ValidationError);
  CHECK_THROWS_AS(InstanceRef("a.example/path"), ValidationError);
  CHECK_THROWS_AS(InstanceRef("a..example"), ValidationError);
}

TEST_CASE("append then read back is byte-identical") {
  TempDir dir;
  const auto snap = rich_snapshot(1000);
  {
    auto store = Store::open(dir.path());
    CHECK(store.append_snapshot(snap) == Ack::appended);
  }
  const auto bytes = read_file(dir.path() / "snapshots.ndjson");
  CHECK(bytes == encode_line(snap) + "\n");

  auto reopened = Store::open(dir.path());
  REQUIRE(reopened.snapshots().size() == 1);
  CHECK(reopened.snapshots()[0] == snap);
  CHECK(encode_line(reopened.snapshots()[0]) + "\n" == bytes);
}

TEST_CASE("identical (instance, observed_at) is stored once") {
  TempDir dir;
  auto store = Store::open(dir.path());
  const auto snap = rich_snapshot(1000);
  CHECK(store.append_snapshot(snap) == Ack::appended);
  CHECK(store.append_snapshot(snap) == Ack::duplicate);
  CHECK(store.snapshots().size() == 1);
  auto changed = snap;
  changed.user_count += 1;
  CHECK_THROWS_AS(store.append_snapshot(changed), StoreError);
}

TEST_CASE("timestamp regression is rejected") {
  auto store = Store::in_memory();
  store.append_snapshot(make_snapshot("a.example", 2000));
  store.append_snapshot(make_snapshot("b.example", 1000));  // other instance: fine
  CHECK_THROWS_WITH_AS(store.append_snapshot(make_snapshot("a.example", 1999)),
                       doctest::Contains("regression"), StoreError);
}

TEST_CASE("invalid snapshots are rejected before writing") {
  auto store = Store::in_memory();
  auto s = make_snapshot("a.example", 1);
  s.user_count = -1;
  CHECK_THROWS_AS(store.append_snapshot(s), ValidationError);
  CHECK(store.snapshots().empty());
}

TEST_CASE("diff_edges") {
  auto store = Store::in_memory();
  const InstanceRef src("src.example"), a("a.example"), b("b.example");
  const Timestamp T = 5000;

  SUBCASE("first-ever observation marks edges pre_window") {
    auto edges = store.diff_edges(src, {}, {a}, T);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0] == FederationEdge{src, a, T, true});
  }
  store.append_snapshot(make_snapshot("src.example", 100));
  SUBCASE("set difference after the first snapshot") {
    auto edges = store.diff_edges(src, {a}, {a, b}, T);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0] == FederationEdge{src, b, T, false});
  }
  SUBCASE("no change yields nothing") { CHECK(store.diff_edges(src, {a, b}, {a, b}, T).empty()); }
}

TEST_CASE("edge first_seen never moves once recorded") {
  TempDir dir;
  const InstanceRef src("src.example"), a("a.example");
  {
    auto store = Store::open(dir.path());
    CHECK(store.append_edges({{src, a, 100, false}}) == 1);
    CHECK(store.append_edges({{src, a, 50, false}, {src, a, 200, false}}) == 0);
  }
  auto store = Store::open(dir.path());
  REQUIRE(store.edges().size() == 1);
  CHECK(store.edges()[0].first_seen == 100);
  CHECK(store.known_peers(src) == std::set<InstanceRef>{a});
  CHECK_THROWS_AS(store.append_edges({{src, src, 1, false}}), ValidationError);
}

TEST_CASE("posts are deduplicated by id and carry no text") {
  TempDir dir;
  auto store = Store::open(dir.path());
  Post p{InstanceRef("a.example"), "42", 10, 1, 2, 3, 4, 5, 6};
  CHECK(store.append_post(p) == Ack::appended);
  CHECK(store.append_post(p) == Ack::duplicate);
  const auto line = read_file(dir.path() / "posts.ndjson");
  auto j = nlohmann::json::parse(line);
  for (const auto& [key, _] : j.items()) {
    CHECK(key != "content");
    CHECK(key != "text");
  }
}

TEST_CASE("a torn trailing line is not part of the readable prefix") {
  TempDir dir;
  {
    auto store = Store::open(dir.path());
    store.append_snapshot(make_snapshot("a.example", 1));
  }
  {
    std::ofstream out(dir.path() / "snapshots.ndjson", std::ios::app);
    out << R"({"kind":"snapshot","instance":"b.exa)";
  }
  auto store = Store::open(dir.path());
  CHECK(store.snapshots().size() == 1);
}

TEST_CASE("round-trip property over generated snapshots") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> count(0, 1'000'000);
  for (int i = 0; i < 200; ++i) {
    auto s = make_snapshot("host" + std::to_string(i) + ".example", count(rng), count(rng), count(rng));
    s.active_month = count(rng);
    s.version = "2." + std::to_string(i % 7) + ".0";
    for (int k = 0; k < i % 5; ++k) {
      s.policy_config.simple_targets.push_back(
          {kAllPolicyActions[(i + k) % std::size(kAllPolicyActions)],
           InstanceRef("t" + std::to_string(k) + ".example")});
      s.admins.insert("admin" + std::to_string(k));
    }
    s.fetch_status = {kAllFetchClasses[i % std::size(kAllFetchClasses)], i % 2 ? "why" : ""};
    CHECK(decode_line<InstanceSnapshot>(encode_line(s)) == s);
  }
}
