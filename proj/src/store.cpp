#include "fedwatch/store.hpp"

#include <json.hpp>

#include "fedwatch/codec.hpp"

namespace fedwatch {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSnapshotsFile = "snapshots.ndjson";
constexpr const char* kEdgesFile = "edges.ndjson";
constexpr const char* kPostsFile = "posts.ndjson";
constexpr const char* kMetaFile = "meta.json";

// Lines without a terminating newline are a writer's unfinished append and
// are not part of the readable prefix.
template <typename Record, typename Fn>
void read_records(const fs::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;
    ++line_no;
    std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      fn(decode_line<Record>(line));
    } catch (const nlohmann::json::exception& e) {
      throw StoreError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::ofstream open_append(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw StoreError("cannot open " + path.string() + " for append");
  return out;
}

}  // namespace

Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::in_memory() { return Store{}; }

Store Store::open(const fs::path& root) {
  if (root.empty()) throw StoreError("store path is empty");
  fs::create_directories(root);
  Store s;
  s.root_ = root;
  const auto meta = root / kMetaFile;
  if (fs::exists(meta)) {
    std::ifstream in(meta);
    auto j = nlohmann::json::parse(in);
    if (j.value("schema_version", 0) != kSchemaVersion) {
      throw StoreError("store at " + root.string() + " has an unsupported schema_version");
    }
  } else {
    std::ofstream out(meta);
    out << nlohmann::json{{"schema_version", kSchemaVersion}, {"format", "fedwatch-store"}}.dump(2)
        << '\n';
  }
  s.load();
  s.snapshots_out_ = open_append(root / kSnapshotsFile);
  s.edges_out_ = open_append(root / kEdgesFile);
  s.posts_out_ = open_append(root / kPostsFile);
  return s;
}

void Store::load() {
  read_records<InstanceSnapshot>(root_ / kSnapshotsFile, [this](InstanceSnapshot s) {
    index_snapshot(s);
    snapshots_.push_back(std::move(s));
  });
  read_records<FederationEdge>(root_ / kEdgesFile, [this](FederationEdge e) {
    peers_[e.source].insert(e.target);
    edges_.push_back(std::move(e));
  });
  read_records<Post>(root_ / kPostsFile, [this](Post p) {
    post_keys_.emplace(p.instance, p.post_id);
    posts_.push_back(std::move(p));
  });
}

void Store::index_snapshot(const InstanceSnapshot& s) {
  snapshot_index_[{s.instance, s.observed_at}] = snapshots_.size();
  auto& last = last_observed_[s.instance];
  last = std::max(last, s.observed_at);
}

void Store::write_line(std::ofstream& out, const std::string& line) {
  if (!persistent()) return;
  out << line << '\n';
  out.flush();
  if (!out) throw StoreError("write failed under " + root_.string());
}

Ack Store::append_snapshot(const InstanceSnapshot& snapshot) {
  snapshot.validate();
  std::lock_guard lock(*mutex_);
  if (auto it = snapshot_index_.find({snapshot.instance, snapshot.observed_at});
      it != snapshot_index_.end()) {
    if (snapshots_[it->second] == snapshot) return Ack::duplicate;
    throw StoreError("conflicting snapshot for " + snapshot.instance.domain() + " at " +
                     std::to_string(snapshot.observed_at));
  }
  if (auto it = last_observed_.find(snapshot.instance);
      it != last_observed_.end() && snapshot.observed_at < it->second) {
    throw StoreError("timestamp regression for " + snapshot.instance.domain() + ": " +
                     std::to_string(snapshot.observed_at) + " < " + std::to_string(it->second));
  }
  write_line(snapshots_out_, encode_line(snapshot));
  index_snapshot(snapshot);
  snapshots_.push_back(snapshot);
  return Ack::appended;
}

std::size_t Store::append_edges(const std::vector<FederationEdge>& edges) {
  std::lock_guard lock(*mutex_);
  std::size_t added = 0;
  for (const auto& e : edges) {
    if (e.source == e.target) throw ValidationError("self edge on " + e.source.domain());
    if (!peers_[e.source].insert(e.target).second) continue;
    write_line(edges_out_, encode_line(e));
    edges_.push_back(e);
    ++added;
  }
  return added;
}

Ack Store::append_post(const Post& post) {
  post.validate();
  std::lock_guard lock(*mutex_);
  if (!post_keys_.emplace(post.instance, post.post_id).second) return Ack::duplicate;
  write_line(posts_out_, encode_line(post));
  posts_.push_back(post);
  return Ack::appended;
}

std::vector<FederationEdge> Store::diff_edges(const InstanceRef& instance,
                                              const std::set<InstanceRef>& prev_peers,
                                              const std::set<InstanceRef>& new_peers,
                                              Timestamp at) const {
  const bool first_observation = !has_snapshot(instance);
  std::vector<FederationEdge> out;
  for (const auto& peer : new_peers) {
    if (peer == instance || prev_peers.contains(peer)) continue;
    out.push_back(FederationEdge{instance, peer, at, first_observation});
  }
  return out;
}

bool Store::has_snapshot(const InstanceRef& instance) const {
  return last_observed_.contains(instance);
}

std::optional<Timestamp> Store::last_observed(const InstanceRef& instance) const {
  if (auto it = last_observed_.find(instance); it != last_observed_.end()) return it->second;
  return std::nullopt;
}

std::set<InstanceRef> Store::known_peers(const InstanceRef& instance) const {
  if (auto it = peers_.find(instance); it != peers_.end()) return it->second;
  return {};
}

std::vector<InstanceRef> Store::instances() const {
  std::vector<InstanceRef> out;
  out.reserve(last_observed_.size());
  for (const auto& [ref, _] : last_observed_) out.push_back(ref);
  return out;
}

std::optional<std::pair<Timestamp, Timestamp>> Store::time_span() const {
  if (snapshots_.empty()) return std::nullopt;
  Timestamp lo = snapshots_.front().observed_at;
  Timestamp hi = lo;
  for (const auto& s : snapshots_) {
    lo = std::min(lo, s.observed_at);
    hi = std::max(hi, s.observed_at);
  }
  return std::pair{lo, hi};
}

}  // namespace fedwatch
