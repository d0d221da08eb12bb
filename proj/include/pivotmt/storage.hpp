#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pivotmt/errors.hpp"

namespace pivotmt {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Canonical JSON text: sorted object keys, no insignificant
/// whitespace. This is the form hashed for cache keys and written to
/// every artifact, so identical logical content is byte-identical.
std::string canonical_json(const nlohmann::json& value);

/// Writes `content` to `path` via a same-directory temp file plus
/// atomic rename; creates parent directories. Throws StorageError.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

/// Whole-file read. Throws StorageError when unreadable.
std::string read_file(const std::filesystem::path& path);

enum class CacheOp { Translate, Complete, QeScore };

std::string cache_op_name(CacheOp op);

/// Identity of one cached backend interaction. payload_hash is the
/// SHA-256 of the canonical logical payload, so field order in the
/// originating JSON never changes the key.
struct CacheKey {
    CacheOp op = CacheOp::Translate;
    std::string payload_hash;
    std::string backend_id;

    /// Hash naming the on-disk entry (payload and backend combined).
    std::string file_hash() const;
};

CacheKey make_cache_key(CacheOp op, const nlohmann::json& logical_payload,
                        std::string backend_id);

/// Content-addressed on-disk cache: directory of hash-named files under
/// `<root>/<op>/<2-char shard>/<hash>`. Values are wrapped in a
/// checksum envelope; corrupt entries are evicted and logged, never
/// returned. Safe for concurrent readers/writers in one process and
/// across processes (atomic rename writes, last-writer-wins).
class Cache {
public:
    explicit Cache(std::filesystem::path root,
                   std::size_t max_value_bytes = 8 * 1024 * 1024);

    /// The exact previously stored value, or nullopt for cold keys and
    /// evicted-corrupt entries.
    std::optional<std::string> get(const CacheKey& key);

    /// Durable write. Empty or oversized values throw StorageError.
    void put(const CacheKey& key, std::string_view value);

    const std::filesystem::path& root() const { return root_; }

    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }
    std::uint64_t corrupt_evictions() const { return corrupt_evictions_.load(); }

private:
    std::filesystem::path entry_path(const CacheKey& key) const;

    std::filesystem::path root_;
    std::size_t max_value_bytes_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
    std::atomic<std::uint64_t> corrupt_evictions_{0};
};

// --- line-oriented JSON artifacts -----------------------------------------

/// Raw line writer/reader used by the typed wrappers below; lines must
/// not contain newlines (canonical JSON never does).
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// One canonical-JSON record per line. Rewriting what read_jsonl
/// returned produces a byte-identical file.
template <typename Record>
void write_jsonl(const std::filesystem::path& path, const std::vector<Record>& records) {
    std::vector<std::string> lines;
    lines.reserve(records.size());
    for (const auto& record : records) lines.push_back(canonical_json(nlohmann::json(record)));
    write_lines(path, lines);
}

template <typename Record>
std::vector<Record> read_jsonl(const std::filesystem::path& path) {
    std::vector<Record> records;
    std::size_t line_number = 0;
    for (const auto& line : read_lines(path)) {
        ++line_number;
        try {
            records.push_back(nlohmann::json::parse(line).get<Record>());
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad JSONL record in ") + path.string() + ": " +
                                 e.what(),
                             line_number);
        }
    }
    return records;
}

/// Everything needed to rerun an experiment: resolved config, input
/// fingerprints, the path list actually used, k, and the merge
/// strategy. `created_at` is the only wall-clock field.
struct RunManifest {
    std::string tool_version;
    std::string created_at;  // ISO-8601 UTC
    nlohmann::json config;
    std::map<std::string, std::string> corpus_fingerprints;  // label -> sha256
    std::vector<std::string> path_codes;
    int k = 0;
    std::string merger_strategy;
};

void to_json(nlohmann::json& j, const RunManifest& manifest);
void from_json(const nlohmann::json& j, RunManifest& manifest);

void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& path);

/// Current UTC time as ISO-8601 (manifest timestamps).
std::string utc_timestamp();

}  // namespace pivotmt
