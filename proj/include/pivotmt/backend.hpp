#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "pivotmt/core.hpp"
#include "pivotmt/errors.hpp"
#include "pivotmt/storage.hpp"

namespace pivotmt {

/// Decoding parameters forwarded verbatim to the model server.
/// Defaults pin deterministic decoding (temperature 0, tight top_p).
struct DecodeParams {
    double temperature = 0.0;
    double top_p = 0.1;
};

struct BackendConfig {
    std::string endpoint;        // "mock:" or http(s)://host:port[/base]
    std::string auth_token_env;  // env var holding the credential; empty = none
    int timeout_ms = 30000;
    int max_batch = 16;
    int retry_limit = 2;
    int retry_backoff_ms = 100;  // base of the exponential backoff
    DecodeParams decode_params;

    void validate() const;  // throws ConfigError on bad bounds
};

void to_json(nlohmann::json& j, const BackendConfig& cfg);
void from_json(const nlohmann::json& j, BackendConfig& cfg);

/// One translation request; batches must share a language pair.
struct TranslateRequest {
    std::string text;
    LanguageCode source_lang;
    LanguageCode target_lang;
};

/// Whole-batch result: translations in request order. Empty
/// translations are legal on the wire but flagged by index so callers
/// can treat them as per-item failures.
struct BatchResult {
    std::vector<std::string> texts;
    std::vector<std::size_t> empty_indices;
};

/// Uniform interface over the translation model and LLM completion
/// endpoints. Implementations are safe for concurrent calls.
class TranslationBackend {
public:
    virtual ~TranslationBackend() = default;

    /// Translates a non-empty batch sharing one language pair, order
    /// preserved; never returns partial batches. Throws
    /// BackendUnavailable after the retry budget, ProtocolError on
    /// contract violations.
    virtual BatchResult translate_batch(const std::vector<TranslateRequest>& requests) = 0;

    /// Completes one prompt verbatim (trailing newlines stripped).
    virtual std::string complete_prompt(const std::string& prompt) = 0;

    virtual const BackendConfig& config() const = 0;

    /// Stable identity for cache keys (the endpoint string).
    virtual std::string id() const = 0;
};

/// Validates the shared translate_batch preconditions: non-empty batch,
/// non-empty texts, distinct languages, uniform pair. Throws ConfigError.
void validate_batch(const std::vector<TranslateRequest>& requests);

/// Stable 64-bit FNV-1a (std::hash is not stable across processes).
std::uint64_t fnv1a64(std::string_view data);

/// Deterministic offline backend. Translation is a tagging function
///   "MOCK(src_code→tgt_code:text)"
/// so pivot hops compose visibly; completions come from a canned map or
/// a stable hash tag. Instrumented for call-count and batch-shape
/// assertions, with optional failure injection.
class MockBackend : public TranslationBackend {
public:
    explicit MockBackend(BackendConfig cfg = default_config());

    static BackendConfig default_config();

    BatchResult translate_batch(const std::vector<TranslateRequest>& requests) override;
    std::string complete_prompt(const std::string& prompt) override;
    const BackendConfig& config() const override { return config_; }
    std::string id() const override { return config_.endpoint; }

    /// The pure tagging function (also what pivot composition tests
    /// recompute independently).
    static std::string tag(const std::string& text, const LanguageCode& source,
                           const LanguageCode& target);

    // --- fixtures ---
    void set_canned_translation(const std::string& text, const std::string& source_code,
                                const std::string& target_code, const std::string& output);
    void set_canned_completion(const std::string& prompt, const std::string& completion);
    /// The next `n` translate_batch calls throw BackendUnavailable.
    void fail_next_translate_batches(int n);

    // --- instrumentation ---
    std::uint64_t translate_items() const { return translate_items_.load(); }
    std::uint64_t translate_batches() const { return translate_batches_.load(); }
    std::uint64_t completion_calls() const { return completion_calls_.load(); }
    void reset_counters();

    /// (source_code, target_code, batch_size) per translate_batch call.
    std::vector<std::tuple<std::string, std::string, std::size_t>> batch_shapes() const;
    std::vector<std::string> prompt_log() const;

private:
    BackendConfig config_;
    mutable std::mutex mutex_;
    std::map<std::tuple<std::string, std::string, std::string>, std::string> canned_translations_;
    std::map<std::string, std::string> canned_completions_;
    int failures_to_inject_ = 0;
    std::vector<std::tuple<std::string, std::string, std::size_t>> batch_shapes_;
    std::vector<std::string> prompt_log_;
    std::atomic<std::uint64_t> translate_items_{0};
    std::atomic<std::uint64_t> translate_batches_{0};
    std::atomic<std::uint64_t> completion_calls_{0};
};

/// POSTs `payload` as JSON to cfg.endpoint + path and returns the
/// parsed JSON response. Shared by the translation and QE clients:
/// resolves the credential env var first (ConfigError before any
/// network use), retries transport failures and 429/5xx responses with
/// exponential backoff plus deterministic jitter, then throws
/// BackendUnavailable; other non-2xx statuses and malformed bodies
/// throw ProtocolError carrying a payload excerpt.
nlohmann::json http_post_json(const BackendConfig& cfg, const std::string& path,
                              const nlohmann::json& payload);

/// HTTP client speaking the wire protocol:
///   POST /translate  [{"text","src_lang","tgt_lang","params"}...]
///                    -> [{"translation"}...]
///   POST /complete   {"prompt","params"} -> {"completion"}
class HttpBackend : public TranslationBackend {
public:
    explicit HttpBackend(BackendConfig cfg);

    BatchResult translate_batch(const std::vector<TranslateRequest>& requests) override;
    std::string complete_prompt(const std::string& prompt) override;
    const BackendConfig& config() const override { return config_; }
    std::string id() const override { return config_.endpoint; }

private:
    BackendConfig config_;
};

/// Decorator that answers from the cache whenever possible and forwards
/// only cache misses to the wrapped backend (as one sub-batch, order
/// preserved). Empty translations are flagged but never cached.
class CachingBackend : public TranslationBackend {
public:
    CachingBackend(TranslationBackend& inner, Cache& cache);

    BatchResult translate_batch(const std::vector<TranslateRequest>& requests) override;
    std::string complete_prompt(const std::string& prompt) override;
    const BackendConfig& config() const override { return inner_.config(); }
    std::string id() const override { return inner_.id(); }

private:
    TranslationBackend& inner_;
    Cache& cache_;
};

/// Builds the backend named by cfg.endpoint: "mock:"-scheme endpoints
/// yield the deterministic mock, http(s) endpoints the HTTP client.
std::unique_ptr<TranslationBackend> make_backend(const BackendConfig& cfg);

/// Logical cache payload for one translate request (text, languages,
/// decode params) — shared by CachingBackend and tests.
nlohmann::json translate_cache_payload(const TranslateRequest& request,
                                       const DecodeParams& params);

/// Logical cache payload for one completion.
nlohmann::json completion_cache_payload(const std::string& prompt, const DecodeParams& params);

}  // namespace pivotmt
