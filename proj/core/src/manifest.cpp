#include "unmix/manifest.hpp"

#include <chrono>
#include <ctime>
#include <memory>

#include <openssl/evp.h>

#include "json.hpp"
#include "unmix/error.hpp"
#include "unmix/io.hpp"

namespace unmix {

using json = nlohmann::json;

std::string_view library_version() { return UNMIX_VERSION; }

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

std::string RunManifest::to_json() const {
    json config_json;
    try {
        config_json = config.empty() ? json::object() : json::parse(config);
    } catch (const json::parse_error&) {
        throw DomainError("manifest config is not valid JSON");
    }
    json doc = {{"command", command},
                {"version", version},
                {"seed", seed},
                {"config", config_json},
                {"input_digests", input_digests},
                {"outputs", outputs},
                {"started_at", started_at},
                {"finished_at", finished_at}};
    return doc.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text, const std::string& source) {
    try {
        const json doc = json::parse(text);
        RunManifest m;
        m.command = doc.at("command").get<std::string>();
        m.version = doc.at("version").get<std::string>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.config = doc.at("config").dump();
        m.input_digests = doc.at("input_digests").get<std::map<std::string, std::string>>();
        m.outputs = doc.at("outputs").get<std::vector<std::string>>();
        m.started_at = doc.at("started_at").get<std::string>();
        m.finished_at = doc.at("finished_at").get<std::string>();
        return m;
    } catch (const json::parse_error& e) {
        throw ParseError(source, 0, e.byte, "invalid JSON");
    } catch (const json::exception& e) {
        throw ParseError(source, 0, 0, e.what());
    }
}

}  // namespace unmix
