#include "pivotmt/generation.hpp"

#include <exception>
#include <optional>
#include <thread>
#include <unordered_set>
#include <utility>

#include "pivotmt/errors.hpp"

namespace pivotmt {

using nlohmann::json;

void to_json(json& j, const PathFailure& f) {
    j = json{{"segment_id", f.segment_id}, {"path", f.path}, {"reason", f.reason}};
}

void from_json(const json& j, PathFailure& f) {
    j.at("segment_id").get_to(f.segment_id);
    j.at("path").get_to(f.path);
    j.at("reason").get_to(f.reason);
}

void to_json(json& j, const GenerationReport& r) {
    j = json{{"path_failures", r.path_failures}, {"failed_segments", r.failed_segments}};
}

void from_json(const json& j, GenerationReport& r) {
    j.at("path_failures").get_to(r.path_failures);
    j.at("failed_segments").get_to(r.failed_segments);
}

namespace {

void validate_generation_inputs(const std::vector<SourceSegment>& segments,
                                const std::vector<TranslationPath>& paths) {
    if (paths.empty()) {
        throw ConfigError("generation requires at least one path");
    }
    for (std::size_t i = 0; i < paths.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (paths[i] == paths[j]) {
                throw ConfigError("duplicate path: " + paths[i].code());
            }
        }
        if (!(paths[i].source_lang == paths[0].source_lang) ||
            !(paths[i].target_lang == paths[0].target_lang)) {
            throw ConfigError("paths disagree on the language pair: " + paths[i].code());
        }
    }
    std::unordered_set<std::string> seen_ids;
    for (const auto& segment : segments) {
        if (segment.id.empty()) {
            throw ConfigError("segment with empty id");
        }
        if (!seen_ids.insert(segment.id).second) {
            throw ConfigError("duplicate segment id: " + segment.id);
        }
        if (segment.text.empty()) {
            throw ConfigError("segment " + segment.id + ": empty text");
        }
        if (!(segment.lang == paths[0].source_lang)) {
            throw ConfigError("segment " + segment.id + ": language " + segment.lang.code +
                              " does not match path source " + paths[0].source_lang.code);
        }
    }
}

// One hop over the live subset of the corpus, chunked to max_batch. Outputs
// are positional: texts[i] is set on success, errors[i] on failure (a chunk
// that errors out fails every segment in it).
struct HopOutcome {
    std::vector<std::string> texts;
    std::vector<std::string> errors;
};

HopOutcome run_hop(const std::vector<std::string>& inputs, const std::vector<char>& live,
                   const LanguageCode& src, const LanguageCode& tgt,
                   TranslationBackend& backend) {
    HopOutcome out;
    out.texts.resize(inputs.size());
    out.errors.resize(inputs.size());

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (live[i]) {
            pending.push_back(i);
        }
    }

    const std::size_t max_batch = backend.config().max_batch;
    for (std::size_t start = 0; start < pending.size(); start += max_batch) {
        const std::size_t end = std::min(start + max_batch, pending.size());
        std::vector<TranslateRequest> batch;
        batch.reserve(end - start);
        for (std::size_t p = start; p < end; ++p) {
            batch.push_back({inputs[pending[p]], src, tgt});
        }
        try {
            const BatchResult result = backend.translate_batch(batch);
            for (std::size_t p = start; p < end; ++p) {
                const std::string& text = result.texts[p - start];
                if (text.empty()) {
                    out.errors[pending[p]] = "empty translation from backend";
                } else {
                    out.texts[pending[p]] = text;
                }
            }
        } catch (const Error& e) {
            // Isolate the failure to this chunk; other chunks still run.
            for (std::size_t p = start; p < end; ++p) {
                out.errors[pending[p]] = e.what();
            }
        }
    }
    return out;
}

// Per-path, per-segment outcome: a candidate or the reason there is none.
struct SlotOutcome {
    std::optional<Candidate> candidate;
    std::string failure;
};

std::vector<SlotOutcome> run_path(const std::vector<SourceSegment>& segments,
                                  const TranslationPath& path,
                                  TranslationBackend& backend) {
    std::vector<std::string> inputs;
    inputs.reserve(segments.size());
    for (const auto& segment : segments) {
        inputs.push_back(segment.text);
    }
    std::vector<char> live(segments.size(), 1);
    std::vector<SlotOutcome> outcomes(segments.size());

    if (path.is_direct()) {
        const HopOutcome hop =
            run_hop(inputs, live, path.source_lang, path.target_lang, backend);
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (!hop.errors[i].empty()) {
                outcomes[i].failure = hop.errors[i];
            } else {
                outcomes[i].candidate =
                    Candidate{hop.texts[i], path, segments[i].id, std::nullopt};
            }
        }
        return outcomes;
    }

    const LanguageCode& pivot = *path.pivot;
    const HopOutcome first = run_hop(inputs, live, path.source_lang, pivot, backend);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!first.errors[i].empty()) {
            live[i] = 0;
            outcomes[i].failure = path.source_lang.code + "\xe2\x86\x92" + pivot.code +
                                  " hop: " + first.errors[i];
        }
    }
    // Second hop only for segments whose intermediate exists.
    const HopOutcome second = run_hop(first.texts, live, pivot, path.target_lang, backend);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!live[i]) {
            continue;
        }
        if (!second.errors[i].empty()) {
            outcomes[i].failure = pivot.code + "\xe2\x86\x92" + path.target_lang.code +
                                  " hop: " + second.errors[i];
        } else {
            outcomes[i].candidate =
                Candidate{second.texts[i], path, segments[i].id, first.texts[i]};
        }
    }
    return outcomes;
}

}  // namespace

CorpusGeneration generate_corpus(const std::vector<SourceSegment>& segments,
                                 const std::vector<TranslationPath>& paths,
                                 TranslationBackend& backend, Cache* cache,
                                 std::size_t parallelism) {
    if (segments.empty()) {
        throw EmptyCorpus("generate_corpus: no segments");
    }
    if (parallelism == 0) {
        throw ConfigError("parallelism must be positive");
    }
    validate_generation_inputs(segments, paths);

    std::optional<CachingBackend> cached;
    if (cache != nullptr) {
        cached.emplace(backend, *cache);
    }
    TranslationBackend& effective = cached ? static_cast<TranslationBackend&>(*cached)
                                           : backend;

    // Paths run concurrently in waves of at most `parallelism` threads; each
    // worker fills its own slot so assembly below is schedule-independent.
    std::vector<std::vector<SlotOutcome>> by_path(paths.size());
    std::vector<std::exception_ptr> worker_errors(paths.size());
    for (std::size_t base = 0; base < paths.size(); base += parallelism) {
        const std::size_t wave_end = std::min(base + parallelism, paths.size());
        std::vector<std::thread> wave;
        for (std::size_t p = base; p < wave_end; ++p) {
            wave.emplace_back([&, p] {
                try {
                    by_path[p] = run_path(segments, paths[p], effective);
                } catch (...) {
                    worker_errors[p] = std::current_exception();
                }
            });
        }
        for (auto& thread : wave) {
            thread.join();
        }
    }
    for (const auto& error : worker_errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }

    CorpusGeneration out;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        CandidatePool pool{segments[s].id, {}, paths};
        for (std::size_t p = 0; p < paths.size(); ++p) {
            SlotOutcome& slot = by_path[p][s];
            if (slot.candidate.has_value()) {
                pool.candidates.push_back(std::move(*slot.candidate));
            } else {
                out.report.path_failures.push_back({segments[s].id, paths[p], slot.failure});
            }
        }
        if (pool.candidates.empty()) {
            out.report.failed_segments.push_back(segments[s].id);
        } else {
            out.pools.push_back(std::move(pool));
        }
    }
    return out;
}

PoolResult generate_pool(const SourceSegment& segment,
                         const std::vector<TranslationPath>& paths,
                         TranslationBackend& backend, Cache* cache) {
    CorpusGeneration run = generate_corpus({segment}, paths, backend, cache, 1);
    if (run.pools.empty()) {
        std::string detail = run.report.path_failures.empty()
                                 ? std::string("no failure recorded")
                                 : run.report.path_failures.front().reason;
        throw GenerationFailed("segment " + segment.id + ": all " +
                               std::to_string(paths.size()) + " paths failed (first: " +
                               detail + ")");
    }
    return {std::move(run.pools.front()), std::move(run.report.path_failures)};
}

}  // namespace pivotmt
