#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <fstream>
#include <thread>
#include <vector>

#include "pivotmt/core.hpp"
#include "pivotmt/storage.hpp"
#include "test_util.hpp"

using namespace pivotmt;
using nlohmann::json;
using testutil::TempDir;

TEST_CASE("sha256 matches the published test vector") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("canonical JSON is independent of construction order") {
    json a;
    a["zeta"] = 1;
    a["alpha"] = json{{"b", 2}, {"a", 1}};
    json b;
    b["alpha"] = json::object();
    b["alpha"]["a"] = 1;
    b["alpha"]["b"] = 2;
    b["zeta"] = 1;
    CHECK(canonical_json(a) == canonical_json(b));
    CHECK(canonical_json(a) == R"({"alpha":{"a":1,"b":2},"zeta":1})");
}

TEST_CASE("cache keys canonicalize logical payloads") {
    json p1;
    p1["text"] = "hello";
    p1["src_lang"] = "kor_Hang";
    p1["tgt_lang"] = "ita_Latn";
    json p2;
    p2["tgt_lang"] = "ita_Latn";
    p2["src_lang"] = "kor_Hang";
    p2["text"] = "hello";
    const auto k1 = make_cache_key(CacheOp::Translate, p1, "mock:");
    const auto k2 = make_cache_key(CacheOp::Translate, p2, "mock:");
    CHECK(k1.payload_hash == k2.payload_hash);
    CHECK(k1.file_hash() == k2.file_hash());
    // different backend or op -> different entry
    const auto k3 = make_cache_key(CacheOp::Translate, p1, "http://other");
    CHECK(k1.file_hash() != k3.file_hash());
    const auto k4 = make_cache_key(CacheOp::Complete, p1, "mock:");
    CHECK(cache_op_name(k4.op) != cache_op_name(k1.op));
}

TEST_CASE("cache get/put round-trip, cold keys, and layout") {
    TempDir dir("cache");
    Cache cache(dir.path());
    const auto key = make_cache_key(CacheOp::Translate, json{{"text", "hi"}}, "mock:");

    CHECK_FALSE(cache.get(key).has_value());
    CHECK(cache.misses() == 1);

    cache.put(key, "ciao");
    const auto value = cache.get(key);
    REQUIRE(value.has_value());
    CHECK(*value == "ciao");
    CHECK(cache.hits() == 1);

    // layout: <root>/<op>/<2-char shard>/<hash>
    const auto hash = key.file_hash();
    CHECK(std::filesystem::exists(dir.path() / "translate" / hash.substr(0, 2) / hash));

    SUBCASE("same logical request with reordered fields hits") {
        json permuted;
        permuted["text"] = "hi";
        const auto same = make_cache_key(CacheOp::Translate, permuted, "mock:");
        CHECK(cache.get(same).has_value());
    }
    SUBCASE("survives a process restart (fresh Cache on same root)") {
        Cache reopened(dir.path());
        const auto again = reopened.get(key);
        REQUIRE(again.has_value());
        CHECK(*again == "ciao");
    }
    SUBCASE("last writer wins") {
        cache.put(key, "nuovo");
        CHECK(*cache.get(key) == "nuovo");
    }
}

TEST_CASE("cache rejects empty and oversized values") {
    TempDir dir("cache_limits");
    Cache cache(dir.path(), 16);
    const auto key = make_cache_key(CacheOp::Complete, json{{"p", 1}}, "mock:");
    CHECK_THROWS_AS(cache.put(key, ""), StorageError);
    CHECK_THROWS_AS(cache.put(key, std::string(17, 'x')), StorageError);
    cache.put(key, std::string(16, 'x'));  // exactly at the cap is fine
    CHECK(cache.get(key).has_value());
}

TEST_CASE("corrupt cache entries are evicted, logged, and reported absent") {
    TempDir dir("cache_corrupt");
    Cache cache(dir.path());
    const auto key = make_cache_key(CacheOp::Translate, json{{"text", "x"}}, "mock:");
    cache.put(key, "good value");

    const auto hash = key.file_hash();
    const auto entry = dir.path() / "translate" / hash.substr(0, 2) / hash;

    SUBCASE("flipped value byte fails the checksum") {
        auto raw = read_file(entry);
        raw[raw.find("good") + 1] = 'X';
        std::ofstream(entry, std::ios::binary | std::ios::trunc) << raw;
    }
    SUBCASE("unparseable garbage") {
        std::ofstream(entry, std::ios::binary | std::ios::trunc) << "not json at all";
    }

    CHECK_FALSE(cache.get(key).has_value());
    CHECK(cache.corrupt_evictions() == 1);
    CHECK_FALSE(std::filesystem::exists(entry));  // evicted
    // a later put repopulates cleanly
    cache.put(key, "fresh");
    CHECK(*cache.get(key) == "fresh");
}

TEST_CASE("concurrent puts of identical values leave one consistent entry") {
    TempDir dir("cache_concurrent");
    Cache cache(dir.path());
    const auto key = make_cache_key(CacheOp::Translate, json{{"text", "t"}}, "mock:");
    std::vector<std::thread> workers;
    for (int i = 0; i < 8; ++i) {
        workers.emplace_back([&cache, &key] {
            for (int rep = 0; rep < 20; ++rep) cache.put(key, "stable value");
        });
    }
    for (auto& w : workers) w.join();
    const auto value = cache.get(key);
    REQUIRE(value.has_value());
    CHECK(*value == "stable value");
}

namespace {

CandidatePool sample_pool(int index) {
    const LanguageCode ko("kor_Hang");
    const LanguageCode it("ita_Latn");
    const LanguageCode en("eng_Latn");
    CandidatePool pool;
    pool.segment_id = std::to_string(index);
    pool.path_order = {TranslationPath::direct(ko, it), TranslationPath::via(en, ko, it)};
    Candidate direct;
    direct.text = "testo " + std::to_string(index);
    direct.path = pool.path_order[0];
    direct.segment_id = pool.segment_id;
    Candidate pivot;
    pivot.text = "testo via inglese " + std::to_string(index);
    pivot.path = pool.path_order[1];
    pivot.segment_id = pool.segment_id;
    pivot.intermediate = "text via english " + std::to_string(index);
    pool.candidates = {direct, pivot};
    return pool;
}

}  // namespace

TEST_CASE("JSONL round-trip of 1000 pools is byte-identical on rewrite") {
    TempDir dir("jsonl");
    const auto path = dir.path() / "pools.jsonl";
    std::vector<CandidatePool> pools;
    pools.reserve(1000);
    for (int i = 0; i < 1000; ++i) pools.push_back(sample_pool(i));
    write_jsonl(path, pools);
    const auto first_bytes = read_file(path);

    const auto reread = read_jsonl<CandidatePool>(path);
    REQUIRE(reread.size() == pools.size());
    CHECK(reread[17].segment_id == "17");
    CHECK(reread[17].candidates[1].intermediate == pools[17].candidates[1].intermediate);

    const auto rewrite_path = dir.path() / "pools2.jsonl";
    write_jsonl(rewrite_path, reread);
    CHECK(read_file(rewrite_path) == first_bytes);
}

TEST_CASE("JSONL reader reports empty files and malformed lines") {
    TempDir dir("jsonl_err");
    const auto path = dir.path() / "records.jsonl";

    SUBCASE("empty file -> empty stream") {
        atomic_write_file(path, "");
        CHECK(read_jsonl<CandidatePool>(path).empty());
    }
    SUBCASE("truncated final line -> ParseError at that line") {
        std::string content = canonical_json(json(sample_pool(0))) + "\n";
        content += R"({"segment_id": "1", "candidates")";  // truncated record
        atomic_write_file(path, content);
        try {
            read_jsonl<CandidatePool>(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line_number == 2);
        }
    }
    SUBCASE("missing file -> StorageError") {
        CHECK_THROWS_AS(read_jsonl<CandidatePool>(dir.path() / "missing.jsonl"), StorageError);
    }
}

TEST_CASE("run manifest round-trips through disk") {
    TempDir dir("manifest");
    RunManifest manifest;
    manifest.tool_version = "pivotmt 0.1.0";
    manifest.created_at = utc_timestamp();
    manifest.config = json{{"k", 3}, {"merger", "selection_top1"}};
    manifest.corpus_fingerprints = {{"corpus", sha256_hex("src")}, {"refs", sha256_hex("ref")}};
    manifest.path_codes = {"eng_Latn", "direct", "spa_Latn", "por_Latn"};
    manifest.k = 3;
    manifest.merger_strategy = "selection_top1";

    const auto path = dir.path() / "manifest.json";
    save_manifest(path, manifest);
    const auto loaded = load_manifest(path);
    CHECK(loaded.tool_version == manifest.tool_version);
    CHECK(loaded.created_at == manifest.created_at);
    CHECK(loaded.config == manifest.config);
    CHECK(loaded.corpus_fingerprints == manifest.corpus_fingerprints);
    CHECK(loaded.path_codes == manifest.path_codes);
    CHECK(loaded.k == manifest.k);
    CHECK(loaded.merger_strategy == manifest.merger_strategy);

    CHECK_THROWS_AS(load_manifest(dir.path() / "nope.json"), StorageError);
    atomic_write_file(dir.path() / "bad.json", "{broken");
    CHECK_THROWS_AS(load_manifest(dir.path() / "bad.json"), ParseError);
}

TEST_CASE("utc timestamps are ISO-8601 shaped") {
    const auto stamp = utc_timestamp();
    REQUIRE(stamp.size() == 20);
    CHECK(stamp[4] == '-');
    CHECK(stamp[7] == '-');
    CHECK(stamp[10] == 'T');
    CHECK(stamp[13] == ':');
    CHECK(stamp[16] == ':');
    CHECK(stamp.back() == 'Z');
    CHECK(stamp.substr(0, 2) == "20");
}
