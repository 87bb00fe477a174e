#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rpo {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance sidecar written next to every output artifact. Timestamps make
// manifests the one output that is not byte-stable across runs; data
// artifacts themselves are.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::map<std::string, uint64_t> seeds;
    std::string tool_version = kToolVersion;
    std::string started_at;
    std::string finished_at;
};

std::string utc_timestamp_now();

// <artifact>.manifest.json
std::string manifest_path_for(const std::string& artifact_path);

// Atomic write (tmp + rename).
void write_manifest(const RunManifest& manifest, const std::string& path);

} // namespace rpo
