#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace relux::io {

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string file_sha256(const std::string& path);

/// Versioned JSON document whose referenced files carry content hashes.
/// Paths are relative to the manifest's directory.
struct Manifest {
    static constexpr int kVersion = 1;

    int version = kVersion;
    nlohmann::json body = nlohmann::json::object();
    std::map<std::string, std::string> hashes;

    /// Records the current hash of `relative` (resolved against `base_dir`).
    void add_file(const std::string& base_dir, const std::string& relative);
    /// Throws HashMismatch if any referenced file is missing or changed.
    void verify(const std::string& base_dir) const;

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);

    void save(const std::string& path) const;
    /// Parses and verifies. Manifests without a "hashes" object load unverified.
    static Manifest load(const std::string& path);
};

std::string parent_dir(const std::string& path);
std::string join_path(const std::string& dir, const std::string& name);

}  // namespace relux::io
