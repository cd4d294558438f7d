#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "fedwatch/features.hpp"
#include "fedwatch/learners.hpp"
#include "fedwatch/mock_server.hpp"
#include "fedwatch/store.hpp"
#include "test_util.hpp"

using namespace fedwatch;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome fedwatch_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "fedwatch");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

// Small enough to keep the pipeline test quick, large enough for ten
// members per class.
json small_params() {
  return {{"n_instances", 80}, {"months", 4}, {"delay_mean_days", 20.0}, {"seed", 3}};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("usage errors exit 2 and show help") {
  CHECK(fedwatch_cmd({}).code == cli::kExitUsage);
  CHECK(fedwatch_cmd({"fly"}).code == cli::kExitUsage);

  auto missing = fedwatch_cmd({"analyze", "--report", "lags"});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("--store") != std::string::npos);

  auto unknown = fedwatch_cmd({"analyze", "--store", "x", "--bogus"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.err.find("Options:") != std::string::npos);

  CHECK(fedwatch_cmd({"train", "--store", "s", "--task", "global", "--family", "svm", "--out", "o"}).code ==
        cli::kExitUsage);
  CHECK(fedwatch_cmd({"analyze", "--store", "s", "--format", "xml"}).code == cli::kExitUsage);

  auto help = fedwatch_cmd({"--help"});
  CHECK(help.code == cli::kExitOk);
  for (auto sub : {"crawl", "analyze", "features", "train", "predict", "synth", "report"})
    CHECK(help.out.find(sub) != std::string::npos);
}

TEST_CASE("inconsistent flags are rejected before any work") {
  testing::TempDir dir;
  const auto out = (dir.path() / "o").string();
  CHECK(fedwatch_cmd({"train", "--store", "nowhere", "--task", "window", "--family", "rf", "--out", out,
                      "--ablate-posts"})
            .code == cli::kExitUsage);
  CHECK(fedwatch_cmd({"train", "--store", "nowhere", "--task", "global", "--family", "rf", "--out", out,
                      "--train-fraction", "1.5"})
            .code == cli::kExitUsage);
  CHECK(fedwatch_cmd({"train", "--store", "nowhere", "--task", "global", "--family", "rf", "--out", out, "--grid",
                      "{\"max_depth\": [3]}"})
            .code == cli::kExitUsage);
  CHECK_FALSE(fs::exists(out));

  const auto params = dir.path() / "bad.json";
  write(params, R"({"n_instances": 50, "colour": "red"})");
  CHECK(fedwatch_cmd({"synth", "--params", params.string(), "--out", (dir.path() / "s").string()}).code ==
        cli::kExitUsage);
}

TEST_CASE("runtime failures exit 1") {
  testing::TempDir dir;
  auto r = fedwatch_cmd({"analyze", "--store", (dir.path() / "missing").string()});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find("no store") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path() / "missing"));
}

TEST_CASE("synth, train, predict, analyze, features and report run as a pipeline") {
  testing::TempDir dir;
  const auto params = dir.path() / "params.json";
  write(params, small_params().dump());
  const auto store = (dir.path() / "store").string();
  REQUIRE(fedwatch_cmd({"synth", "--params", params.string(), "--out", store}).code == 0);
  CHECK(fs::exists(fs::path(store) / "manifest.json"));
  // A second run must not overwrite the store.
  CHECK(fedwatch_cmd({"synth", "--params", params.string(), "--out", store}).code == cli::kExitRuntime);

  const auto rf = dir.path() / "rf";
  auto train = fedwatch_cmd({"train", "--store", store, "--task", "global", "--family", "rf", "--seed", "4", "--out",
                             rf.string(), "--grid", R"({"max_depth": [4, 8], "n_estimators": [50]})"});
  REQUIRE_MESSAGE(train.code == 0, train.err);
  const json metrics = json::parse(testing::read_file(rf / "metrics.json"));
  CHECK(metrics.at("task") == "global");
  CHECK(metrics.at("family") == "rf");
  const double f1 = metrics.at("test").at("f1").get<double>();
  CHECK(f1 >= 0.0);
  CHECK(f1 <= 1.0);
  CHECK(metrics.at("cv").size() == 2);
  const auto model = TrainedModel::load(rf / "model.json");
  CHECK(model.family == Family::rf);
  CHECK(first_line(testing::read_file(rf / "importance.csv")) == "rank,feature,weight");

  const auto wl1 = dir.path() / "wl1.json", wl2 = dir.path() / "wl2.json";
  REQUIRE(fedwatch_cmd({"predict", "--model", (rf / "model.json").string(), "--store", store, "--out", wl1.string()})
              .code == 0);
  REQUIRE(fedwatch_cmd({"predict", "--model", (rf / "model.json").string(), "--store", store, "--out", wl2.string()})
              .code == 0);
  CHECK(testing::read_file(wl1) == testing::read_file(wl2));
  const json wl = json::parse(testing::read_file(wl1));
  REQUIRE(wl.is_array());
  for (std::size_t k = 0; k < wl.size(); ++k) {
    CHECK(wl[k].at("rank") == k + 1);
    CHECK(wl[k].at("score").get<double>() >= 0.5);
    if (k > 0) CHECK(wl[k].at("score").get<double>() <= wl[k - 1].at("score").get<double>());
  }
  const auto top3 = dir.path() / "top3.json";
  REQUIRE(fedwatch_cmd({"predict", "--model", (rf / "model.json").string(), "--store", store, "--out", top3.string(),
                        "--top-k", "3"})
              .code == 0);
  CHECK(json::parse(testing::read_file(top3)).size() == 3);

  const auto an = dir.path() / "analysis";
  REQUIRE(fedwatch_cmd({"analyze", "--store", store, "--report", "lags", "--out", an.string()}).code == 0);
  CHECK(first_line(testing::read_file(an / "lags.csv")) == "source,target,federated_at,policy_at,lag_days");
  CHECK_FALSE(fs::exists(an / "footprint.csv"));

  const auto an_json = dir.path() / "analysis-json";
  REQUIRE(fedwatch_cmd({"analyze", "--store", store, "--format", "json", "--out", an_json.string()}).code == 0);
  for (auto name : {"footprint", "growth", "admins", "lags", "moderator_split", "targets"}) {
    CAPTURE(name);
    const auto parsed = json::parse(testing::read_file(an_json / (std::string(name) + ".json")), nullptr, false);
    CHECK_FALSE(parsed.is_discarded());
  }

  const auto features = dir.path() / "features.csv";
  REQUIRE(fedwatch_cmd({"features", "--store", store, "--out", features.string()}).code == 0);
  std::string header = "domain";
  for (auto n : kFeatureNames) header += "," + std::string(n);
  const auto table = testing::read_file(features);
  CHECK(first_line(table) == header);
  CHECK(std::count(table.begin(), table.end(), '\n') == 81);

  const auto summary = dir.path() / "summary.json";
  REQUIRE(fedwatch_cmd({"report", "--store", store, "--out", summary.string()}).code == 0);
  const json s = json::parse(testing::read_file(summary));
  CHECK(s.at("instances") == 80);
  CHECK(s.at("latest_fetch_outcomes").at("ok") == 80);
}

TEST_CASE("synth randomness flows from --seed") {
  testing::TempDir dir;
  auto manifest = [&](const std::string& name, const std::string& seed) {
    const auto out = dir.path() / name;
    const auto params = dir.path() / "p.json";
    write(params, json{{"n_instances", 30}, {"months", 2}}.dump());
    REQUIRE(fedwatch_cmd({"synth", "--params", params.string(), "--out", out.string(), "--seed", seed}).code == 0);
    return testing::read_file(out / "manifest.json");
  };
  CHECK(manifest("a", "7") == manifest("b", "7"));
  CHECK(manifest("c", "7") != manifest("d", "8"));
}

TEST_CASE("crawl drives the crawler against a mock server") {
  testing::TempDir dir;
  MockServer server(MockWorld::load(testing::fixture("crawl/world.json")));
  const auto config = dir.path() / "crawl.json";
  write(config, json{{"seed_instances", {"alpha.example", "gamma.example"}},
                     {"per_host_min_interval_ms", 50},
                     {"timeout_ms", 400},
                     {"contact", "ops@example.org"}}
                    .dump());
  const auto store = (dir.path() / "store").string();
  const auto reports = dir.path() / "reports.ndjson";
  auto r = fedwatch_cmd({"crawl", "--store", store, "--config", config.string(), "--mock-base-url", server.base_url(),
                         "--cycles", "2", "--at", "2021-01-01T00:00:00Z", "--report-out", reports.string(),
                         "--lexicon", testing::fixture("lexicon_test.txt").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  std::istringstream lines(testing::read_file(reports));
  std::vector<json> cycles;
  for (std::string line; std::getline(lines, line);) cycles.push_back(json::parse(line));
  REQUIRE(cycles.size() == 2);
  CHECK(cycles[0].at("observed_at") == 1609459200);
  CHECK(cycles[1].at("observed_at") == 1609459200 + 14400);
  CHECK(cycles[0].at("attempted") == 2);
  CHECK(cycles[0].at("outcomes").at("ok") == 1);
  CHECK(cycles[0].at("outcomes").at("not_found_404") == 1);
  // alpha's peers are attempted in the second cycle.
  CHECK(cycles[1].at("attempted") == 5);

  const auto s = Store::open(store);
  // alpha's four peers, then beta and newpeer each list alpha.
  CHECK(s.edges().size() == 4 + 2);
  CHECK_FALSE(s.posts().empty());

  auto nothing = fedwatch_cmd({"crawl", "--store", (dir.path() / "empty").string()});
  CHECK(nothing.code == cli::kExitUsage);
  CHECK_FALSE(fs::exists(dir.path() / "empty"));
}
