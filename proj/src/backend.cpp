#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "pivotmt/backend.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace pivotmt {

void BackendConfig::validate() const {
    if (endpoint.empty()) throw ConfigError("backend endpoint must be set");
    if (max_batch < 1) throw ConfigError("backend max_batch must be >= 1");
    if (timeout_ms <= 0) throw ConfigError("backend timeout_ms must be > 0");
    if (retry_limit < 0) throw ConfigError("backend retry_limit must be >= 0");
    if (retry_backoff_ms < 0) throw ConfigError("backend retry_backoff_ms must be >= 0");
    if (decode_params.temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (decode_params.top_p <= 0.0 || decode_params.top_p > 1.0) {
        throw ConfigError("top_p must be in (0, 1]");
    }
}

void to_json(nlohmann::json& j, const BackendConfig& cfg) {
    j = nlohmann::json{{"endpoint", cfg.endpoint},
                       {"auth_token_env", cfg.auth_token_env},
                       {"timeout_ms", cfg.timeout_ms},
                       {"max_batch", cfg.max_batch},
                       {"retry_limit", cfg.retry_limit},
                       {"retry_backoff_ms", cfg.retry_backoff_ms},
                       {"params",
                        {{"temperature", cfg.decode_params.temperature},
                         {"top_p", cfg.decode_params.top_p}}}};
}

void from_json(const nlohmann::json& j, BackendConfig& cfg) {
    cfg.endpoint = j.at("endpoint").get<std::string>();
    cfg.auth_token_env = j.value("auth_token_env", std::string{});
    cfg.timeout_ms = j.value("timeout_ms", 30000);
    cfg.max_batch = j.value("max_batch", 16);
    cfg.retry_limit = j.value("retry_limit", 2);
    cfg.retry_backoff_ms = j.value("retry_backoff_ms", 100);
    if (j.contains("params")) {
        const auto& params = j.at("params");
        cfg.decode_params.temperature = params.value("temperature", 0.0);
        cfg.decode_params.top_p = params.value("top_p", 0.1);
    } else {
        cfg.decode_params = {};
    }
    cfg.validate();
}

void validate_batch(const std::vector<TranslateRequest>& requests) {
    if (requests.empty()) throw ConfigError("translate_batch: empty batch");
    const auto& source = requests.front().source_lang;
    const auto& target = requests.front().target_lang;
    for (const auto& request : requests) {
        if (request.text.empty()) throw ConfigError("translate_batch: empty request text");
        if (request.source_lang == request.target_lang) {
            throw ConfigError("translate_batch: source equals target ('" +
                              request.source_lang.code + "')");
        }
        if (request.source_lang != source || request.target_lang != target) {
            throw ConfigError("translate_batch: mixed language pairs in one batch");
        }
    }
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

namespace {

std::string fnv1a64_hex(std::string_view data) {
    static const char digits[] = "0123456789abcdef";
    auto value = fnv1a64(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string strip_trailing_newlines(std::string text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

nlohmann::json params_json(const DecodeParams& params) {
    return nlohmann::json{{"temperature", params.temperature}, {"top_p", params.top_p}};
}

}  // namespace

nlohmann::json translate_cache_payload(const TranslateRequest& request,
                                       const DecodeParams& params) {
    return nlohmann::json{{"text", request.text},
                          {"src_lang", request.source_lang.code},
                          {"tgt_lang", request.target_lang.code},
                          {"params", params_json(params)}};
}

nlohmann::json completion_cache_payload(const std::string& prompt, const DecodeParams& params) {
    return nlohmann::json{{"prompt", prompt}, {"params", params_json(params)}};
}

// --- MockBackend -----------------------------------------------------------

BackendConfig MockBackend::default_config() {
    BackendConfig cfg;
    cfg.endpoint = "mock:";
    return cfg;
}

MockBackend::MockBackend(BackendConfig cfg) : config_(std::move(cfg)) {
    config_.validate();
}

std::string MockBackend::tag(const std::string& text, const LanguageCode& source,
                             const LanguageCode& target) {
    return "MOCK(" + source.code + "\xe2\x86\x92" + target.code + ":" + text + ")";
}

BatchResult MockBackend::translate_batch(const std::vector<TranslateRequest>& requests) {
    validate_batch(requests);
    {
        std::lock_guard lock(mutex_);
        if (failures_to_inject_ > 0) {
            --failures_to_inject_;
            throw BackendUnavailable("mock: injected transport failure");
        }
        batch_shapes_.emplace_back(requests.front().source_lang.code,
                                   requests.front().target_lang.code, requests.size());
    }
    translate_batches_.fetch_add(1);
    translate_items_.fetch_add(requests.size());

    BatchResult result;
    result.texts.reserve(requests.size());
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const auto& request = requests[i];
        const auto canned = canned_translations_.find(
            {request.text, request.source_lang.code, request.target_lang.code});
        std::string text = canned != canned_translations_.end()
                               ? canned->second
                               : tag(request.text, request.source_lang, request.target_lang);
        if (text.empty()) result.empty_indices.push_back(i);
        result.texts.push_back(std::move(text));
    }
    return result;
}

std::string MockBackend::complete_prompt(const std::string& prompt) {
    if (prompt.empty()) throw ConfigError("complete_prompt: empty prompt");
    completion_calls_.fetch_add(1);
    std::lock_guard lock(mutex_);
    prompt_log_.push_back(prompt);
    const auto canned = canned_completions_.find(prompt);
    if (canned != canned_completions_.end()) return strip_trailing_newlines(canned->second);
    return "MOCK-COMPLETION(" + fnv1a64_hex(prompt) + ")";
}

void MockBackend::set_canned_translation(const std::string& text, const std::string& source_code,
                                         const std::string& target_code,
                                         const std::string& output) {
    std::lock_guard lock(mutex_);
    canned_translations_[{text, source_code, target_code}] = output;
}

void MockBackend::set_canned_completion(const std::string& prompt,
                                        const std::string& completion) {
    std::lock_guard lock(mutex_);
    canned_completions_[prompt] = completion;
}

void MockBackend::fail_next_translate_batches(int n) {
    std::lock_guard lock(mutex_);
    failures_to_inject_ = n;
}

void MockBackend::reset_counters() {
    std::lock_guard lock(mutex_);
    translate_items_.store(0);
    translate_batches_.store(0);
    completion_calls_.store(0);
    batch_shapes_.clear();
    prompt_log_.clear();
}

std::vector<std::tuple<std::string, std::string, std::size_t>> MockBackend::batch_shapes()
    const {
    std::lock_guard lock(mutex_);
    return batch_shapes_;
}

std::vector<std::string> MockBackend::prompt_log() const {
    std::lock_guard lock(mutex_);
    return prompt_log_;
}

// --- HTTP client -----------------------------------------------------------

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path_prefix;
};

SplitUrl split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint is not a URL: '" + endpoint + "'");
    }
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    auto prefix = endpoint.substr(path_start);
    if (prefix == "/") prefix.clear();
    return {endpoint.substr(0, path_start), prefix};
}

std::string payload_excerpt_of(const std::string& body) {
    constexpr std::size_t kLimit = 200;
    if (body.size() <= kLimit) return body;
    return body.substr(0, kLimit) + "…";
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

nlohmann::json http_post_json(const BackendConfig& cfg, const std::string& path,
                              const nlohmann::json& payload) {
    cfg.validate();

    // Credential resolution happens before any network activity.
    httplib::Headers headers;
    if (!cfg.auth_token_env.empty()) {
        const char* token = std::getenv(cfg.auth_token_env.c_str());
        if (token == nullptr || *token == '\0') {
            throw ConfigError("credential env var '" + cfg.auth_token_env + "' is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    const auto url = split_endpoint(cfg.endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(0, cfg.timeout_ms * 1000);
    client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    client.set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);

    const std::string body = canonical_json(payload);
    const std::string full_path = url.path_prefix + path;

    std::string last_error;
    for (int attempt = 0; attempt <= cfg.retry_limit; ++attempt) {
        if (attempt > 0) {
            // Exponential backoff with deterministic jitter: reruns
            // sleep identically (there is no RNG anywhere in the
            // pipeline).
            const auto base = static_cast<std::uint64_t>(cfg.retry_backoff_ms) << (attempt - 1);
            const auto jitter_span = static_cast<std::uint64_t>(cfg.retry_backoff_ms / 4 + 1);
            const auto jitter =
                fnv1a64(body + "#" + std::to_string(attempt)) % jitter_span;
            std::this_thread::sleep_for(std::chrono::milliseconds(base + jitter));
        }
        auto result = client.Post(full_path, headers, body, "application/json");
        if (!result) {
            last_error = httplib::to_string(result.error());
            continue;  // transport failure: retry
        }
        if (result->status >= 200 && result->status < 300) {
            try {
                return nlohmann::json::parse(result->body);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError(std::string("malformed JSON response: ") + e.what(),
                                    payload_excerpt_of(result->body));
            }
        }
        if (retryable_status(result->status)) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        throw ProtocolError("HTTP " + std::to_string(result->status) + " from " + full_path,
                            payload_excerpt_of(result->body));
    }
    throw BackendUnavailable("backend " + cfg.endpoint + " unavailable after " +
                             std::to_string(cfg.retry_limit + 1) + " attempts: " + last_error);
}

HttpBackend::HttpBackend(BackendConfig cfg) : config_(std::move(cfg)) {
    config_.validate();
    // Fail fast on missing credentials, before any request is built.
    if (!config_.auth_token_env.empty() &&
        std::getenv(config_.auth_token_env.c_str()) == nullptr) {
        throw ConfigError("credential env var '" + config_.auth_token_env + "' is not set");
    }
}

BatchResult HttpBackend::translate_batch(const std::vector<TranslateRequest>& requests) {
    validate_batch(requests);
    nlohmann::json payload = nlohmann::json::array();
    for (const auto& request : requests) {
        payload.push_back(translate_cache_payload(request, config_.decode_params));
    }
    const auto response = http_post_json(config_, "/translate", payload);
    if (!response.is_array() || response.size() != requests.size()) {
        throw ProtocolError("translate response is not an array of " +
                                std::to_string(requests.size()) + " items",
                            payload_excerpt_of(response.dump()));
    }
    BatchResult result;
    result.texts.reserve(requests.size());
    for (std::size_t i = 0; i < response.size(); ++i) {
        if (!response[i].is_object() || !response[i].contains("translation")) {
            throw ProtocolError("translate response item missing 'translation'",
                                payload_excerpt_of(response[i].dump()));
        }
        auto text = response[i]["translation"].get<std::string>();
        if (text.empty()) result.empty_indices.push_back(i);
        result.texts.push_back(std::move(text));
    }
    return result;
}

std::string HttpBackend::complete_prompt(const std::string& prompt) {
    if (prompt.empty()) throw ConfigError("complete_prompt: empty prompt");
    const auto response = http_post_json(
        config_, "/complete", completion_cache_payload(prompt, config_.decode_params));
    if (!response.is_object() || !response.contains("completion")) {
        throw ProtocolError("completion response missing 'completion'",
                            payload_excerpt_of(response.dump()));
    }
    return strip_trailing_newlines(response["completion"].get<std::string>());
}

// --- CachingBackend --------------------------------------------------------

CachingBackend::CachingBackend(TranslationBackend& inner, Cache& cache)
    : inner_(inner), cache_(cache) {}

BatchResult CachingBackend::translate_batch(const std::vector<TranslateRequest>& requests) {
    validate_batch(requests);
    const auto& params = inner_.config().decode_params;

    std::vector<std::optional<std::string>> resolved(requests.size());
    std::vector<CacheKey> keys;
    keys.reserve(requests.size());
    std::vector<std::size_t> miss_indices;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        keys.push_back(make_cache_key(CacheOp::Translate,
                                      translate_cache_payload(requests[i], params),
                                      inner_.id()));
        resolved[i] = cache_.get(keys[i]);
        if (!resolved[i]) miss_indices.push_back(i);
    }

    if (!miss_indices.empty()) {
        std::vector<TranslateRequest> misses;
        misses.reserve(miss_indices.size());
        for (const auto i : miss_indices) misses.push_back(requests[i]);
        const auto fresh = inner_.translate_batch(misses);
        for (std::size_t m = 0; m < miss_indices.size(); ++m) {
            resolved[miss_indices[m]] = fresh.texts[m];
            // Empty translations are per-item failures: flagged by the
            // caller, never cached.
            if (!fresh.texts[m].empty()) cache_.put(keys[miss_indices[m]], fresh.texts[m]);
        }
    }

    BatchResult result;
    result.texts.reserve(requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (resolved[i]->empty()) result.empty_indices.push_back(i);
        result.texts.push_back(std::move(*resolved[i]));
    }
    return result;
}

std::string CachingBackend::complete_prompt(const std::string& prompt) {
    const auto key = make_cache_key(
        CacheOp::Complete, completion_cache_payload(prompt, inner_.config().decode_params),
        inner_.id());
    if (auto cached = cache_.get(key)) return *cached;
    const auto completion = inner_.complete_prompt(prompt);
    if (!completion.empty()) cache_.put(key, completion);
    return completion;
}

std::unique_ptr<TranslationBackend> make_backend(const BackendConfig& cfg) {
    cfg.validate();
    if (cfg.endpoint.rfind("mock:", 0) == 0) return std::make_unique<MockBackend>(cfg);
    if (cfg.endpoint.rfind("http://", 0) == 0 || cfg.endpoint.rfind("https://", 0) == 0) {
        return std::make_unique<HttpBackend>(cfg);
    }
    throw ConfigError("unsupported backend endpoint scheme: '" + cfg.endpoint + "'");
}

}  // namespace pivotmt
