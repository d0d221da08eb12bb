#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>

#include "pivotmt/backend.hpp"
#include "pivotmt/storage.hpp"
#include "test_util.hpp"

using namespace pivotmt;
using nlohmann::json;
using testutil::FixtureServer;
using testutil::TempDir;

namespace {

const LanguageCode kKorean{"kor_Hang"};
const LanguageCode kEnglish{"eng_Latn"};
const LanguageCode kItalian{"ita_Latn"};

TranslateRequest request_of(const std::string& text, const LanguageCode& source,
                            const LanguageCode& target) {
    TranslateRequest r;
    r.text = text;
    r.source_lang = source;
    r.target_lang = target;
    return r;
}

BackendConfig http_config(const std::string& endpoint, int retry_limit = 0) {
    BackendConfig cfg;
    cfg.endpoint = endpoint;
    cfg.retry_limit = retry_limit;
    cfg.retry_backoff_ms = 1;  // keep test retries fast
    return cfg;
}

}  // namespace

TEST_CASE("mock translation is the documented tagging function") {
    MockBackend mock;
    const auto result = mock.translate_batch({request_of("hello", kKorean, kEnglish)});
    REQUIRE(result.texts.size() == 1);
    CHECK(result.texts[0] == "MOCK(kor_Hang\xe2\x86\x92""eng_Latn:hello)");
    CHECK(result.empty_indices.empty());
}

TEST_CASE("mock determinism across instances (processes)") {
    MockBackend a;
    MockBackend b;
    const auto batch = std::vector<TranslateRequest>{request_of("text", kKorean, kItalian)};
    CHECK(a.translate_batch(batch).texts == b.translate_batch(batch).texts);
    CHECK(a.complete_prompt("some prompt") == b.complete_prompt("some prompt"));
    CHECK(a.complete_prompt("some prompt") != a.complete_prompt("other prompt"));
}

TEST_CASE("batch order preservation under permutation") {
    MockBackend mock;
    std::vector<TranslateRequest> batch = {request_of("uno", kKorean, kItalian),
                                           request_of("due", kKorean, kItalian),
                                           request_of("tre", kKorean, kItalian)};
    const auto straight = mock.translate_batch(batch).texts;
    std::vector<TranslateRequest> permuted = {batch[2], batch[0], batch[1]};
    const auto shuffled = mock.translate_batch(permuted).texts;
    CHECK(shuffled[0] == straight[2]);
    CHECK(shuffled[1] == straight[0]);
    CHECK(shuffled[2] == straight[1]);
}

TEST_CASE("batch preconditions are validated") {
    MockBackend mock;
    CHECK_THROWS_AS(mock.translate_batch({}), ConfigError);
    CHECK_THROWS_AS(mock.translate_batch({request_of("", kKorean, kItalian)}), ConfigError);
    CHECK_THROWS_AS(mock.translate_batch({request_of("x", kKorean, kKorean)}), ConfigError);
    CHECK_THROWS_AS(mock.translate_batch({request_of("x", kKorean, kItalian),
                                          request_of("y", kKorean, kEnglish)}),
                    ConfigError);
}

TEST_CASE("mock canned fixtures and failure injection") {
    MockBackend mock;
    mock.set_canned_translation("hola", "spa_Latn", "ita_Latn", "ciao");
    const LanguageCode spa("spa_Latn");
    const auto result = mock.translate_batch({request_of("hola", spa, kItalian)});
    CHECK(result.texts[0] == "ciao");

    mock.set_canned_completion("prompt in", "fused out");
    CHECK(mock.complete_prompt("prompt in") == "fused out");

    mock.fail_next_translate_batches(2);
    CHECK_THROWS_AS(mock.translate_batch({request_of("a", spa, kItalian)}),
                    BackendUnavailable);
    CHECK_THROWS_AS(mock.translate_batch({request_of("a", spa, kItalian)}),
                    BackendUnavailable);
    CHECK(mock.translate_batch({request_of("a", spa, kItalian)}).texts.size() == 1);
}

TEST_CASE("mock instrumentation counts items, batches, and shapes") {
    MockBackend mock;
    mock.translate_batch({request_of("a", kKorean, kItalian),
                          request_of("b", kKorean, kItalian)});
    mock.translate_batch({request_of("c", kKorean, kEnglish)});
    CHECK(mock.translate_batches() == 2);
    CHECK(mock.translate_items() == 3);
    const auto shapes = mock.batch_shapes();
    REQUIRE(shapes.size() == 2);
    CHECK(shapes[0] == std::tuple<std::string, std::string, std::size_t>{"kor_Hang",
                                                                         "ita_Latn", 2});
    CHECK(shapes[1] == std::tuple<std::string, std::string, std::size_t>{"kor_Hang",
                                                                         "eng_Latn", 1});
    mock.reset_counters();
    CHECK(mock.translate_batches() == 0);
    CHECK(mock.batch_shapes().empty());
}

TEST_CASE("completion strips trailing newlines only") {
    MockBackend mock;
    mock.set_canned_completion("p", "  result text \n\r\n");
    CHECK(mock.complete_prompt("p") == "  result text ");
}

TEST_CASE("credential env var is checked before any network call") {
    ::unsetenv("PIVOTMT_TEST_MISSING_TOKEN");
    auto cfg = http_config("http://127.0.0.1:1");  // nothing listens there
    cfg.auth_token_env = "PIVOTMT_TEST_MISSING_TOKEN";
    CHECK_THROWS_AS(HttpBackend{cfg}, ConfigError);
    CHECK_THROWS_AS(http_post_json(cfg, "/translate", json::array()), ConfigError);
}

TEST_CASE("http backend round-trips the wire protocol") {
    FixtureServer fixture;
    std::atomic<int> seen_items{0};
    fixture.server.Post("/translate", [&](const httplib::Request& req, httplib::Response& res) {
        const auto batch = json::parse(req.body);
        json reply = json::array();
        for (const auto& item : batch) {
            seen_items.fetch_add(1);
            reply.push_back({{"translation", "tr:" + item.at("text").get<std::string>()}});
        }
        res.set_content(reply.dump(), "application/json");
    });
    fixture.server.Post("/complete", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        res.set_content(json{{"completion", "done:" + body.at("prompt").get<std::string>() +
                                                "\n"}}
                            .dump(),
                        "application/json");
    });
    fixture.start();

    HttpBackend backend(http_config(fixture.base_url()));
    const auto result = backend.translate_batch({request_of("uno", kKorean, kItalian),
                                                 request_of("due", kKorean, kItalian)});
    CHECK(result.texts == std::vector<std::string>{"tr:uno", "tr:due"});
    CHECK(seen_items.load() == 2);
    CHECK(backend.complete_prompt("ask") == "done:ask");  // trailing \n stripped
}

TEST_CASE("http backend forwards the credential header") {
    FixtureServer fixture;
    std::string seen_auth;
    fixture.server.Post("/complete", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(json{{"completion", "ok"}}.dump(), "application/json");
    });
    fixture.start();

    ::setenv("PIVOTMT_TEST_TOKEN", "sekrit", 1);
    auto cfg = http_config(fixture.base_url());
    cfg.auth_token_env = "PIVOTMT_TEST_TOKEN";
    HttpBackend backend(cfg);
    CHECK(backend.complete_prompt("x") == "ok");
    CHECK(seen_auth == "Bearer sekrit");
    ::unsetenv("PIVOTMT_TEST_TOKEN");
}

TEST_CASE("429 then 200 succeeds with retry_limit=1") {
    FixtureServer fixture;
    std::atomic<int> calls{0};
    fixture.server.Post("/translate", [&](const httplib::Request&, httplib::Response& res) {
        if (calls.fetch_add(1) == 0) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        res.set_content(json::array({{{"translation", "ok"}}}).dump(), "application/json");
    });
    fixture.start();

    HttpBackend backend(http_config(fixture.base_url(), /*retry_limit=*/1));
    const auto result = backend.translate_batch({request_of("x", kKorean, kItalian)});
    CHECK(result.texts == std::vector<std::string>{"ok"});
    CHECK(calls.load() == 2);
}

TEST_CASE("persistent 5xx exhausts retries into BackendUnavailable") {
    FixtureServer fixture;
    std::atomic<int> calls{0};
    fixture.server.Post("/translate", [&](const httplib::Request&, httplib::Response& res) {
        calls.fetch_add(1);
        res.status = 503;
    });
    fixture.start();

    HttpBackend backend(http_config(fixture.base_url(), /*retry_limit=*/2));
    CHECK_THROWS_AS(backend.translate_batch({request_of("x", kKorean, kItalian)}),
                    BackendUnavailable);
    CHECK(calls.load() == 3);  // initial try + 2 retries
}

TEST_CASE("non-retryable status and malformed bodies raise ProtocolError with excerpt") {
    FixtureServer fixture;
    fixture.server.Post("/translate", [](const httplib::Request&, httplib::Response& res) {
        res.status = 404;
        res.set_content("no such model here", "text/plain");
    });
    fixture.server.Post("/complete", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("this is not json {", "application/json");
    });
    fixture.start();

    HttpBackend backend(http_config(fixture.base_url()));
    try {
        backend.translate_batch({request_of("x", kKorean, kItalian)});
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(e.payload_excerpt == "no such model here");
        CHECK(std::string(e.what()).find("404") != std::string::npos);
    }
    CHECK_THROWS_AS(backend.complete_prompt("x"), ProtocolError);
}

TEST_CASE("wrong-length and malformed translate responses raise ProtocolError") {
    FixtureServer fixture;
    fixture.server.Post("/translate", [](const httplib::Request& req, httplib::Response& res) {
        const auto batch = json::parse(req.body);
        if (batch.size() == 2) {
            // one item short
            res.set_content(json::array({{{"translation", "only one"}}}).dump(),
                            "application/json");
        } else {
            // missing the translation field
            res.set_content(json::array({{{"nope", 1}}}).dump(), "application/json");
        }
    });
    fixture.start();

    HttpBackend backend(http_config(fixture.base_url()));
    CHECK_THROWS_AS(backend.translate_batch({request_of("a", kKorean, kItalian),
                                             request_of("b", kKorean, kItalian)}),
                    ProtocolError);
    CHECK_THROWS_AS(backend.translate_batch({request_of("a", kKorean, kItalian)}),
                    ProtocolError);
}

TEST_CASE("empty translations are flagged per index, not fatal") {
    FixtureServer fixture;
    fixture.server.Post("/translate", [](const httplib::Request& req, httplib::Response& res) {
        const auto batch = json::parse(req.body);
        json reply = json::array();
        for (std::size_t i = 0; i < batch.size(); ++i) {
            reply.push_back({{"translation", i == 1 ? "" : "ok"}});
        }
        res.set_content(reply.dump(), "application/json");
    });
    fixture.start();

    HttpBackend backend(http_config(fixture.base_url()));
    const auto result = backend.translate_batch({request_of("a", kKorean, kItalian),
                                                 request_of("b", kKorean, kItalian),
                                                 request_of("c", kKorean, kItalian)});
    CHECK(result.texts == std::vector<std::string>{"ok", "", "ok"});
    CHECK(result.empty_indices == std::vector<std::size_t>{1});
}

TEST_CASE("caching backend answers warm requests without inner calls") {
    TempDir dir("caching_backend");
    Cache cache(dir.path());
    MockBackend mock;
    CachingBackend cached(mock, cache);

    const std::vector<TranslateRequest> batch = {request_of("uno", kKorean, kItalian),
                                                 request_of("due", kKorean, kItalian)};
    const auto cold = cached.translate_batch(batch);
    CHECK(mock.translate_items() == 2);

    const auto warm = cached.translate_batch(batch);
    CHECK(warm.texts == cold.texts);
    CHECK(mock.translate_items() == 2);  // no new inner traffic
    CHECK(cache.hits() >= 2);

    SUBCASE("mixed batch forwards only the misses, in order") {
        const std::vector<TranslateRequest> mixed = {request_of("uno", kKorean, kItalian),
                                                     request_of("tre", kKorean, kItalian),
                                                     request_of("quattro", kKorean, kItalian)};
        const auto result = cached.translate_batch(mixed);
        CHECK(result.texts[0] == cold.texts[0]);
        const auto shapes = mock.batch_shapes();
        CHECK(std::get<2>(shapes.back()) == 2);  // only "tre" and "quattro" forwarded
    }
    SUBCASE("completions are cached too") {
        const auto first = cached.complete_prompt("fuse these");
        CHECK(mock.completion_calls() == 1);
        CHECK(cached.complete_prompt("fuse these") == first);
        CHECK(mock.completion_calls() == 1);
    }
    SUBCASE("decode params are part of the key") {
        auto cfg = MockBackend::default_config();
        cfg.decode_params.temperature = 0.7;
        MockBackend warm_mock(cfg);
        CachingBackend cached_warm(warm_mock, cache);
        cached_warm.translate_batch(batch);
        CHECK(warm_mock.translate_items() == 2);  // different params -> cold keys
    }
}

TEST_CASE("empty translations are never cached") {
    TempDir dir("caching_empty");
    Cache cache(dir.path());
    MockBackend mock;
    mock.set_canned_translation("vuoto", "kor_Hang", "ita_Latn", "");
    CachingBackend cached(mock, cache);
    const std::vector<TranslateRequest> batch = {request_of("vuoto", kKorean, kItalian)};

    const auto first = cached.translate_batch(batch);
    CHECK(first.empty_indices == std::vector<std::size_t>{0});
    const auto second = cached.translate_batch(batch);
    CHECK(second.empty_indices == std::vector<std::size_t>{0});
    CHECK(mock.translate_items() == 2);  // retried against the backend both times
}

TEST_CASE("make_backend dispatches on the endpoint scheme") {
    BackendConfig mock_cfg = MockBackend::default_config();
    CHECK(dynamic_cast<MockBackend*>(make_backend(mock_cfg).get()) != nullptr);

    auto http_cfg = http_config("http://127.0.0.1:9");
    CHECK(dynamic_cast<HttpBackend*>(make_backend(http_cfg).get()) != nullptr);

    BackendConfig bad;
    bad.endpoint = "ftp://files";
    CHECK_THROWS_AS(make_backend(bad), ConfigError);
}

TEST_CASE("backend config validation and JSON round-trip") {
    BackendConfig cfg;
    cfg.endpoint = "mock:";
    cfg.decode_params.top_p = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.decode_params.top_p = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.decode_params.top_p = 0.1;
    cfg.decode_params.temperature = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.decode_params.temperature = 0.0;
    cfg.max_batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.max_batch = 16;
    cfg.validate();

    const json j = cfg;
    CHECK(j.at("params").at("top_p") == 0.1);
    const auto back = j.get<BackendConfig>();
    CHECK(back.endpoint == cfg.endpoint);
    CHECK(back.max_batch == cfg.max_batch);
    CHECK(back.decode_params.temperature == cfg.decode_params.temperature);

    json defaults = {{"endpoint", "mock:"}};
    const auto min = defaults.get<BackendConfig>();
    CHECK(min.retry_limit == 2);
    CHECK(min.decode_params.top_p == 0.1);
}
