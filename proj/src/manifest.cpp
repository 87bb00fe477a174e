#include "rpo/manifest.hpp"

#include <ctime>

#include <json.hpp>

#include "rpo/dataset_io.hpp"

namespace rpo {

std::string utc_timestamp_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_path_for(const std::string& artifact_path) {
    return artifact_path + ".manifest.json";
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    nlohmann::json j{{"command", manifest.command},
                     {"config_path", manifest.config_path},
                     {"inputs", manifest.inputs},
                     {"outputs", manifest.outputs},
                     {"seeds", manifest.seeds},
                     {"tool_version", manifest.tool_version},
                     {"started_at", manifest.started_at},
                     {"finished_at", manifest.finished_at}};
    write_file_atomic(path, j.dump(2) + "\n");
}

} // namespace rpo
