#pragma once

// JSON encodings of the persisted record kinds. One object per line on disk.

#include <string>

#include <json.hpp>

#include "fedwatch/types.hpp"

namespace fedwatch {

inline constexpr int kSchemaVersion = 1;

void to_json(nlohmann::json& j, const InstanceRef& r);
void from_json(const nlohmann::json& j, InstanceRef& r);
void to_json(nlohmann::json& j, const FetchOutcome& o);
void from_json(const nlohmann::json& j, FetchOutcome& o);
void to_json(nlohmann::json& j, const SimplePolicyTarget& t);
void from_json(const nlohmann::json& j, SimplePolicyTarget& t);
void to_json(nlohmann::json& j, const PolicyConfig& c);
void from_json(const nlohmann::json& j, PolicyConfig& c);
void to_json(nlohmann::json& j, const InstanceSnapshot& s);
void from_json(const nlohmann::json& j, InstanceSnapshot& s);
void to_json(nlohmann::json& j, const FederationEdge& e);
void from_json(const nlohmann::json& j, FederationEdge& e);
void to_json(nlohmann::json& j, const Post& p);
void from_json(const nlohmann::json& j, Post& p);

/// Single-line encoding with the schema_version field; no trailing newline.
template <typename Record>
std::string encode_line(const Record& r) {
  nlohmann::json j = r;
  j["schema_version"] = kSchemaVersion;
  return j.dump();
}

template <typename Record>
Record decode_line(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  if (j.value("schema_version", 0) != kSchemaVersion) {
    throw ValidationError("unsupported schema_version in record: " + line.substr(0, 80));
  }
  return j.get<Record>();
}

}  // namespace fedwatch
