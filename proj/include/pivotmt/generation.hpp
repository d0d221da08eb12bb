#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pivotmt/backend.hpp"
#include "pivotmt/core.hpp"
#include "pivotmt/storage.hpp"

namespace pivotmt {

// One path that produced no usable candidate for one segment, and why.
// Failures are isolated per path: the rest of the pool is still returned.
struct PathFailure {
    std::string segment_id;
    TranslationPath path;
    std::string reason;
};

void to_json(nlohmann::json& j, const PathFailure& f);
void from_json(const nlohmann::json& j, PathFailure& f);

// Result of generating one segment's pool: the pool plus isolated failures.
struct PoolResult {
    CandidatePool pool;
    std::vector<PathFailure> failures;
};

// Corpus-level failure summary. `failed_segments` lists segments where every
// path failed; those have no pool in the output.
struct GenerationReport {
    std::vector<PathFailure> path_failures;
    std::vector<std::string> failed_segments;

    bool clean() const { return path_failures.empty() && failed_segments.empty(); }
};

void to_json(nlohmann::json& j, const GenerationReport& r);
void from_json(const nlohmann::json& j, GenerationReport& r);

struct CorpusGeneration {
    std::vector<CandidatePool> pools;  // source order, failed segments omitted
    GenerationReport report;
};

// Translate one segment through every path. Direct paths cost one backend
// call, pivot paths two chained calls with the intermediate text recorded.
// Throws GenerationFailed only when every path failed. A non-null cache makes
// the calls read-through cached.
PoolResult generate_pool(const SourceSegment& segment,
                         const std::vector<TranslationPath>& paths,
                         TranslationBackend& backend, Cache* cache = nullptr);

// Corpus-wise generation: per-path requests are batched in corpus order up to
// BackendConfig.max_batch, and a pivot path's second hop starts only after its
// first hop finished. Paths run concurrently, at most `parallelism` at a time;
// assembly is by index so output bytes do not depend on the thread schedule.
// Segment failures do not abort the run; they are summarized in the report.
CorpusGeneration generate_corpus(const std::vector<SourceSegment>& segments,
                                 const std::vector<TranslationPath>& paths,
                                 TranslationBackend& backend, Cache* cache = nullptr,
                                 std::size_t parallelism = 1);

}  // namespace pivotmt
