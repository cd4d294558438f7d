#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "fedwatch/types.hpp"

namespace fedwatch {

class StoreError : public Error {
 public:
  using Error::Error;
};

enum class Ack { appended, duplicate };

/// Append-only record store. On disk it is a directory holding
/// snapshots.ndjson, edges.ndjson, posts.ndjson and meta.json; an empty
/// path keeps everything in memory (tests, generators).
///
/// One writer at a time per directory; appends from several threads are
/// serialized by an internal mutex. Everything is loaded into memory on open.
class Store {
 public:
  static Store open(const std::filesystem::path& root);
  static Store in_memory();

  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  ~Store();

  /// Idempotent for a repeated identical (instance, observed_at); throws
  /// StoreError on timestamp regression or on a conflicting duplicate.
  Ack append_snapshot(const InstanceSnapshot& snapshot);
  /// Skips (source, target) pairs that already have an edge.
  std::size_t append_edges(const std::vector<FederationEdge>& edges);
  Ack append_post(const Post& post);

  /// One edge per element of new_peers \ prev_peers, stamped `at`. Edges
  /// found at the instance's first-ever snapshot are marked pre_window.
  std::vector<FederationEdge> diff_edges(const InstanceRef& instance,
                                         const std::set<InstanceRef>& prev_peers,
                                         const std::set<InstanceRef>& new_peers,
                                         Timestamp at) const;

  const std::vector<InstanceSnapshot>& snapshots() const { return snapshots_; }
  const std::vector<FederationEdge>& edges() const { return edges_; }
  const std::vector<Post>& posts() const { return posts_; }

  bool has_snapshot(const InstanceRef& instance) const;
  std::optional<Timestamp> last_observed(const InstanceRef& instance) const;
  /// All targets ever recorded as peers of `instance`.
  std::set<InstanceRef> known_peers(const InstanceRef& instance) const;
  /// Instances with at least one snapshot, sorted.
  std::vector<InstanceRef> instances() const;

  /// Earliest and latest observed_at over all snapshots.
  std::optional<std::pair<Timestamp, Timestamp>> time_span() const;

  const std::filesystem::path& root() const { return root_; }
  bool persistent() const { return !root_.empty(); }

 private:
  Store() = default;
  void load();
  void write_line(std::ofstream& out, const std::string& line);
  void index_snapshot(const InstanceSnapshot& s);

  std::filesystem::path root_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
  std::ofstream snapshots_out_;
  std::ofstream edges_out_;
  std::ofstream posts_out_;

  std::vector<InstanceSnapshot> snapshots_;
  std::vector<FederationEdge> edges_;
  std::vector<Post> posts_;

  std::map<InstanceRef, Timestamp> last_observed_;
  std::map<std::pair<InstanceRef, Timestamp>, std::size_t> snapshot_index_;
  std::map<InstanceRef, std::set<InstanceRef>> peers_;
  std::set<std::pair<InstanceRef, std::string>> post_keys_;
};

}  // namespace fedwatch
