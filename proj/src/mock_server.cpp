#include "fedwatch/mock_server.hpp"

#include <cstdio>
#include <fstream>

#include <httplib.h>

#include "fedwatch/types.hpp"

namespace fedwatch {

using nlohmann::json;

namespace {

std::string padded_id(std::size_t n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%08zu", n);
  return buf;
}

std::string iso_day(std::size_t day_offset) {
  // 2021-01-01 plus day_offset days, at noon.
  const std::time_t t = 1609502400 + static_cast<std::time_t>(day_offset) * 86400;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S.000Z", &tm);
  return buf;
}

// Newest first; every fifth status is remote when remote > 0.
std::vector<json> generate_timeline(const std::string& domain, std::size_t local, std::size_t remote) {
  const std::size_t total = local + remote;
  std::vector<json> out;
  std::size_t remote_left = remote;
  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t id = total - k;
    const bool is_remote = remote_left > 0 && (k % 5 == 4 || total - k <= remote_left);
    if (is_remote) --remote_left;
    const std::string user = "user" + std::to_string(id % 7);
    out.push_back({{"id", padded_id(id)},
                   {"created_at", iso_day(id)},
                   {"content", "<p>post " + std::to_string(id) + " for @friend #topic" + std::to_string(id % 3) +
                                   " https://" + domain + "/notice/" + std::to_string(id) + "</p>"},
                   {"account",
                    {{"acct", is_remote ? user + "@elsewhere.example" : user},
                     {"followers_count", 10 + id % 7},
                     {"following_count", 5 + id % 7}}},
                   {"reblogs_count", id % 4},
                   {"replies_count", id % 2}});
  }
  return out;
}

}  // namespace

MockWorld MockWorld::from_json(const json& j) {
  MockWorld w;
  if (j.contains("expected")) w.expected = j.at("expected");
  for (const auto& [domain, entry] : j.at("instances").items()) {
    MockInstance m;
    m.status = entry.value("status", 200);
    if (entry.contains("peers_status")) m.peers_status = entry.at("peers_status").get<int>();
    if (entry.contains("timeline_status")) m.timeline_status = entry.at("timeline_status").get<int>();
    m.delay_ms = entry.value("delay_ms", 0);
    m.instance = entry.value("instance", json::object());
    if (entry.contains("nodeinfo")) m.nodeinfo = entry.at("nodeinfo");
    m.peers = entry.value("peers", json::array());
    if (entry.contains("peers_raw")) m.peers_raw = entry.at("peers_raw").get<std::string>();
    if (entry.contains("timeline")) {
      const auto& t = entry.at("timeline");
      if (t.is_array()) {
        m.timeline = t.get<std::vector<json>>();
      } else {
        m.timeline = generate_timeline(domain, t.value("local", 0u), t.value("remote", 0u));
      }
    }
    w.instances.emplace(domain, std::move(m));
  }
  return w;
}

MockWorld MockWorld::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mock world " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error("bad mock world " + path.string() + ": " + e.what());
  }
}

MockServer::MockServer(MockWorld world, int port) : server_(std::make_unique<httplib::Server>()), world_(std::move(world)) {
  server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  server_->Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
    MockRequest entry;
    entry.received = std::chrono::steady_clock::now();
    const std::size_t now_in = ++in_flight_;
    for (std::size_t prev = max_in_flight_.load(); now_in > prev && !max_in_flight_.compare_exchange_weak(prev, now_in);) {
    }
    entry.host = req.get_header_value("Host");
    entry.target = req.target;
    entry.user_agent = req.get_header_value("User-Agent");
    int status = 200;
    std::string body, link;
    handle(entry.host, req.path, req.target, req.params, status, body, link);
    res.status = status;
    if (!link.empty()) res.set_header("Link", link);
    res.set_content(body, "application/json");
    entry.status = status;
    entry.finished = std::chrono::steady_clock::now();
    --in_flight_;
    std::lock_guard lock(mutex_);
    log_.push_back(std::move(entry));
  });
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    if (!server_->bind_to_port("127.0.0.1", port)) throw Error("cannot bind mock server to port " + std::to_string(port));
    port_ = port;
  }
  if (port_ <= 0) throw Error("cannot bind mock server");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockServer::~MockServer() {
  stop();
  if (thread_.joinable()) thread_.join();
}

void MockServer::stop() { server_->stop(); }

void MockServer::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::vector<MockRequest> MockServer::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

void MockServer::clear_log() {
  std::lock_guard lock(mutex_);
  log_.clear();
  max_in_flight_ = 0;
}

void MockServer::set_instance(const std::string& domain, MockInstance instance) {
  std::lock_guard lock(mutex_);
  world_.instances[domain] = std::move(instance);
}

void MockServer::handle(const std::string& host, const std::string& path, const std::string&,
                        const std::multimap<std::string, std::string>& params, int& status, std::string& body,
                        std::string& link) {
  MockInstance inst;
  {
    std::lock_guard lock(mutex_);
    auto it = world_.instances.find(host);
    if (it == world_.instances.end()) {
      status = 404;
      body = R"({"error":"unknown host"})";
      return;
    }
    inst = it->second;
  }
  if (inst.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(inst.delay_ms));
  status = inst.status;

  if (path == "/api/v1/instance/peers") {
    if (inst.peers_status) status = *inst.peers_status;
    body = inst.peers_raw ? *inst.peers_raw : inst.peers.dump();
  } else if (path == "/api/v1/instance") {
    body = inst.instance.dump();
  } else if (path == "/.well-known/nodeinfo") {
    if (!inst.nodeinfo) {
      status = 404;
      body = "{}";
    } else {
      body = json{{"links", {{{"rel", "http://nodeinfo.diaspora.software/ns/schema/2.0"},
                               {"href", "https://" + host + "/nodeinfo/2.0.json"}}}}}
                 .dump();
    }
  } else if (path == "/nodeinfo/2.0.json") {
    if (!inst.nodeinfo) {
      status = 404;
      body = "{}";
    } else {
      body = inst.nodeinfo->dump();
    }
  } else if (path == "/api/v1/timelines/public") {
    if (inst.timeline_status) status = *inst.timeline_status;
    std::size_t limit = 20;
    std::optional<std::string> max_id;
    for (const auto& [k, v] : params) {
      if (k == "limit") limit = std::stoul(v);
      if (k == "max_id") max_id = v;
    }
    json page = json::array();
    std::size_t k = 0;
    while (k < inst.timeline.size() && max_id && inst.timeline[k].at("id").get<std::string>() >= *max_id) ++k;
    for (; k < inst.timeline.size() && page.size() < limit; ++k) page.push_back(inst.timeline[k]);
    if (k < inst.timeline.size() && !page.empty()) {
      link = "<https://" + host + "/api/v1/timelines/public?local=true&limit=" + std::to_string(limit) +
             "&max_id=" + page.back().at("id").get<std::string>() + ">; rel=\"next\"";
    }
    body = page.dump();
  } else {
    status = 404;
    body = R"({"error":"not found"})";
  }
  if (status >= 400 && path != "/.well-known/nodeinfo" && path != "/nodeinfo/2.0.json") body = R"({"error":"mock"})";
}

}  // namespace fedwatch
