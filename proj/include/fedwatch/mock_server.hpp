#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace fedwatch {

/// One simulated instance. Status codes apply to every endpoint unless an
/// endpoint-specific override is set.
struct MockInstance {
  int status = 200;
  std::optional<int> peers_status;
  std::optional<int> timeline_status;
  int delay_ms = 0;
  nlohmann::json instance = nlohmann::json::object();  // /api/v1/instance body
  std::optional<nlohmann::json> nodeinfo;               // served under /nodeinfo/2.0.json
  nlohmann::json peers = nlohmann::json::array();
  std::optional<std::string> peers_raw;      // served verbatim instead of `peers`
  std::vector<nlohmann::json> timeline;      // newest first
};

/// Instances keyed by domain, plus whatever expectations the fixture carries.
struct MockWorld {
  std::map<std::string, MockInstance> instances;
  nlohmann::json expected = nlohmann::json::object();

  /// Reads a world file. Timelines may be given as a list of statuses or as
  /// {"local": n, "remote": m}, which generates deterministic statuses.
  static MockWorld load(const std::filesystem::path& path);
  static MockWorld from_json(const nlohmann::json& j);
};

struct MockRequest {
  std::string host;    // Host header
  std::string target;  // path and query, verbatim
  std::string user_agent;
  int status = 0;
  std::chrono::steady_clock::time_point received;
  std::chrono::steady_clock::time_point finished;
};

/// HTTP server answering for many instances on one loopback port; the
/// instance is chosen by the Host header. Unknown hosts get 404.
class MockServer {
 public:
  explicit MockServer(MockWorld world, int port = 0);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::string base_url() const;
  int port() const { return port_; }

  std::vector<MockRequest> requests() const;
  std::size_t max_in_flight() const { return max_in_flight_.load(); }
  void clear_log();

  /// Replaces one instance while serving.
  void set_instance(const std::string& domain, MockInstance instance);

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  void handle(const std::string& host, const std::string& path, const std::string& target,
              const std::multimap<std::string, std::string>& params, int& status, std::string& body,
              std::string& link);

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  MockWorld world_;
  std::vector<MockRequest> log_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

}  // namespace fedwatch
