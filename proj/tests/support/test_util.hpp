#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "fedwatch/types.hpp"

namespace fedwatch::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fedwatch-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(FEDWATCH_FIXTURES_DIR) / rel;
}

inline InstanceSnapshot make_snapshot(const std::string& domain, Timestamp at, std::int64_t users = 10,
                                      std::int64_t posts = 100) {
  InstanceSnapshot s;
  s.instance = InstanceRef(domain);
  s.observed_at = at;
  s.user_count = users;
  s.post_count = posts;
  s.version = "2.4.0";
  return s;
}

}  // namespace fedwatch::testing
