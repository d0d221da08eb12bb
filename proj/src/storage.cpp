#include "pivotmt/storage.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

namespace pivotmt {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &digest_len, EVP_sha256(), nullptr) != 1) {
        throw StorageError("SHA-256 digest failed");
    }
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

std::string canonical_json(const nlohmann::json& value) {
    // nlohmann objects are std::map-backed: keys are already sorted.
    // dump() with no indent emits no insignificant whitespace.
    return value.dump();
}

void atomic_write_file(const fs::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw StorageError("cannot create directory " + path.parent_path().string() + ": " +
                               ec.message());
        }
    }
    static std::atomic<std::uint64_t> counter{0};
    const auto temp = path.parent_path() /
                      (path.filename().string() + ".tmp." +
                       std::to_string(counter.fetch_add(1)) + "." +
                       std::to_string(static_cast<unsigned long long>(::getpid())));
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot open " + temp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            fs::remove(temp, ec);
            throw StorageError("write failed for " + temp.string());
        }
    }
    fs::rename(temp, path, ec);
    if (ec) {
        fs::remove(temp, ec);
        throw StorageError("rename to " + path.string() + " failed: " + ec.message());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (!in.good() && !in.eof()) throw StorageError("read failed for " + path.string());
    return std::move(buffer).str();
}

std::string cache_op_name(CacheOp op) {
    switch (op) {
        case CacheOp::Translate: return "translate";
        case CacheOp::Complete: return "complete";
        case CacheOp::QeScore: return "qe_score";
    }
    throw ConfigError("unknown cache op value");
}

std::string CacheKey::file_hash() const {
    return sha256_hex(payload_hash + ":" + backend_id);
}

CacheKey make_cache_key(CacheOp op, const nlohmann::json& logical_payload,
                        std::string backend_id) {
    CacheKey key;
    key.op = op;
    key.payload_hash = sha256_hex(canonical_json(logical_payload));
    key.backend_id = std::move(backend_id);
    return key;
}

Cache::Cache(fs::path root, std::size_t max_value_bytes)
    : root_(std::move(root)), max_value_bytes_(max_value_bytes) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw StorageError("cannot create cache root " + root_.string() + ": " + ec.message());
}

fs::path Cache::entry_path(const CacheKey& key) const {
    const auto hash = key.file_hash();
    return root_ / cache_op_name(key.op) / hash.substr(0, 2) / hash;
}

std::optional<std::string> Cache::get(const CacheKey& key) {
    const auto path = entry_path(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        misses_.fetch_add(1);
        return std::nullopt;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string raw = std::move(buffer).str();

    // Checksum envelope: {"checksum": sha256(value), "value": ...}.
    // Anything that does not parse or verify is a corrupt entry:
    // evict, log, and report a miss.
    try {
        const auto envelope = nlohmann::json::parse(raw);
        const auto value = envelope.at("value").get<std::string>();
        if (envelope.at("checksum").get<std::string>() == sha256_hex(value)) {
            hits_.fetch_add(1);
            return value;
        }
    } catch (const std::exception&) {
        // fall through to eviction
    }
    corrupt_evictions_.fetch_add(1);
    std::error_code ec;
    fs::remove(path, ec);
    std::cerr << "pivotmt: corrupt cache entry evicted: " << path.string() << "\n";
    misses_.fetch_add(1);
    return std::nullopt;
}

void Cache::put(const CacheKey& key, std::string_view value) {
    if (value.empty()) throw StorageError("cache_put: empty value");
    if (value.size() > max_value_bytes_) {
        throw StorageError("cache_put: value of " + std::to_string(value.size()) +
                           " bytes exceeds limit of " + std::to_string(max_value_bytes_));
    }
    nlohmann::json envelope;
    envelope["checksum"] = sha256_hex(value);
    envelope["value"] = std::string(value);
    atomic_write_file(entry_path(key), canonical_json(envelope));
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::string content;
    for (const auto& line : lines) {
        content += line;
        content += '\n';
    }
    atomic_write_file(path, content);
}

std::vector<std::string> read_lines(const fs::path& path) {
    const std::string content = read_file(path);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < content.size()) {
        const auto end = content.find('\n', start);
        if (end == std::string::npos) {
            // no trailing newline: surface the final fragment anyway so
            // the JSONL reader can report the parse position
            lines.push_back(content.substr(start));
            break;
        }
        lines.push_back(content.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

void to_json(nlohmann::json& j, const RunManifest& manifest) {
    j = nlohmann::json{{"tool_version", manifest.tool_version},
                       {"created_at", manifest.created_at},
                       {"config", manifest.config},
                       {"corpus_fingerprints", manifest.corpus_fingerprints},
                       {"path_codes", manifest.path_codes},
                       {"k", manifest.k},
                       {"merger_strategy", manifest.merger_strategy}};
}

void from_json(const nlohmann::json& j, RunManifest& manifest) {
    manifest.tool_version = j.at("tool_version").get<std::string>();
    manifest.created_at = j.at("created_at").get<std::string>();
    manifest.config = j.at("config");
    manifest.corpus_fingerprints =
        j.at("corpus_fingerprints").get<std::map<std::string, std::string>>();
    manifest.path_codes = j.at("path_codes").get<std::vector<std::string>>();
    manifest.k = j.at("k").get<int>();
    manifest.merger_strategy = j.at("merger_strategy").get<std::string>();
}

void save_manifest(const fs::path& path, const RunManifest& manifest) {
    atomic_write_file(path, canonical_json(nlohmann::json(manifest)) + "\n");
}

RunManifest load_manifest(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path)).get<RunManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad manifest " + path.string() + ": " + e.what());
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
    std::tm utc{};
    gmtime_r(&seconds, &utc);
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  utc.tm_year + 1900, utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min,
                  utc.tm_sec);
    return buffer;
}

}  // namespace pivotmt
