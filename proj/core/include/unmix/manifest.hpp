#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace unmix {

/// Provenance record written next to every set of results.
struct RunManifest {
    std::string command;
    std::string version;
    std::uint64_t seed = 0;
    /// Compact JSON echo of the full configuration.
    std::string config;
    /// Input path -> SHA-256 of its contents (lowercase hex).
    std::map<std::string, std::string> input_digests;
    /// Result files, relative to the output directory.
    std::vector<std::string> outputs;
    std::string started_at;
    std::string finished_at;

    std::string to_json() const;
    static RunManifest from_json(std::string_view text, const std::string& source = "manifest");

    bool operator==(const RunManifest&) const = default;
};

inline constexpr const char* kManifestFileName = "manifest.json";

/// Library version string.
std::string_view library_version();

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace unmix
