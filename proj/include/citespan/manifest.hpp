#pragma once

// Run manifests: every artifact-producing command records what it read and
// wrote, keyed by content hashes, so a run can be replayed or audited.

#include <ctime>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "citespan/hash.hpp"

namespace citespan {

struct ManifestArtifact {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string config_fingerprint;  // "-" when no feature config is involved
  ManifestArtifact corpus;
  std::vector<ManifestArtifact> models;
  std::vector<ManifestArtifact> outputs;
  std::uint64_t seed = 0;
  std::string timestamp;  // ISO 8601 UTC
};

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline ManifestArtifact hash_artifact(const std::string& path) {
  return {path, sha256_file(path)};
}

inline json manifest_to_json(const RunManifest& m) {
  auto artifact_list = [](const std::vector<ManifestArtifact>& items) {
    json arr = json::array();
    for (const auto& artifact : items)
      arr.push_back({{"path", artifact.path}, {"sha256", artifact.sha256}});
    return arr;
  };
  return json{{"format", "citespan-manifest"},
              {"version", 1},
              {"command", m.command},
              {"config_fingerprint", m.config_fingerprint},
              {"corpus", {{"path", m.corpus.path}, {"sha256", m.corpus.sha256}}},
              {"models", artifact_list(m.models)},
              {"outputs", artifact_list(m.outputs)},
              {"seed", m.seed},
              {"timestamp", m.timestamp}};
}

inline void save_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace citespan
