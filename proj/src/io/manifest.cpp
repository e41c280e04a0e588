#include "relux/io/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <openssl/evp.h>

#include "relux/error.hpp"
#include "relux/io/pfm.hpp"

namespace relux::io {

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 15]);
    }
    return out;
}

std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

std::string parent_dir(const std::string& path) {
    const auto p = std::filesystem::path(path).parent_path();
    return p.empty() ? "." : p.string();
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void Manifest::add_file(const std::string& base_dir, const std::string& relative) {
    hashes[relative] = file_sha256(join_path(base_dir, relative));
}

void Manifest::verify(const std::string& base_dir) const {
    for (const auto& [rel, expected] : hashes) {
        const auto path = join_path(base_dir, rel);
        if (!std::filesystem::exists(path)) throw HashMismatch("manifest file missing: " + rel);
        if (file_sha256(path) != expected) throw HashMismatch("content hash mismatch for " + rel);
    }
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json j = body;
    j["version"] = version;
    j["hashes"] = hashes;
    return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("manifest must be a JSON object");
    Manifest m;
    if (!j.contains("version") || !j.at("version").is_number_integer())
        throw InvalidArgument("manifest has no integer version field");
    m.version = j.at("version").get<int>();
    if (m.version != kVersion) throw InvalidArgument("unsupported manifest version " + std::to_string(m.version));
    m.body = j;
    m.body.erase("version");
    m.body.erase("hashes");
    if (j.contains("hashes")) m.hashes = j.at("hashes").get<std::map<std::string, std::string>>();
    return m;
}

void Manifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json().dump(2) << "\n";
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("manifest JSON: ") + e.what(), e.byte - 1);
    }
    Manifest m = from_json(j);
    m.verify(parent_dir(path));
    return m;
}

}  // namespace relux::io
