#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pivotmt {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration (bad language code, missing
/// credential env var, malformed config file, invalid CLI usage).
struct ConfigError : Error {
    using Error::Error;
};

/// Input corpus is empty where at least one segment is required.
struct EmptyCorpus : Error {
    using Error::Error;
};

/// Transport-level backend failure that persisted through the retry budget.
struct BackendUnavailable : Error {
    using Error::Error;
};

/// Backend answered, but outside the wire contract (non-2xx status,
/// malformed body, wrong batch length, non-finite score). Carries a raw
/// payload excerpt for debugging.
struct ProtocolError : Error {
    explicit ProtocolError(const std::string& msg, std::string excerpt = "")
        : Error(excerpt.empty() ? msg : msg + " | payload: " + excerpt),
          payload_excerpt(std::move(excerpt)) {}

    std::string payload_excerpt;
};

/// Every translation path failed for a segment (or a run exceeded its
/// failure budget), so no candidate pool / output could be produced.
struct GenerationFailed : Error {
    using Error::Error;
};

/// Parallel inputs that must align (hypotheses vs references, sources vs
/// candidates) have mismatched lengths or ids.
struct InputMismatch : Error {
    using Error::Error;
};

/// Corpus or reference files disagree with what a run expects
/// (fingerprint or line-count mismatch).
struct CorpusMismatch : Error {
    using Error::Error;
};

/// Metric computation was asked for something undefined.
struct MetricError : Error {
    using Error::Error;
};

/// A path-selection table has fewer rows than the requested top-n.
struct InsufficientPaths : Error {
    using Error::Error;
};

/// QE scoring is configured but unusable (endpoint missing/unreachable
/// in a context where ranking cannot proceed).
struct QeUnavailable : Error {
    using Error::Error;
};

/// A canned fixture was asked for an input it does not cover.
struct FixtureGap : Error {
    using Error::Error;
};

/// Prompt rendering was asked to violate a template contract
/// (empty source, candidate-count bounds, empty language name).
struct RenderError : Error {
    using Error::Error;
};

/// A merge strategy produced an empty output text.
struct EmptyMergeOutput : Error {
    using Error::Error;
};

/// Filesystem-level storage failure (unwritable cache dir, oversized
/// value, artifact write failure).
struct StorageError : Error {
    using Error::Error;
};

/// A line-oriented or structured input failed to parse. Remembers the
/// 1-based line number when the source is line-oriented.
struct ParseError : Error {
    explicit ParseError(const std::string& msg, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + msg : msg),
          line_number(line) {}

    std::size_t line_number = 0;
};

}  // namespace pivotmt
