#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pivotmt/errors.hpp"

namespace pivotmt {

/// True when `code` matches the accepted identifier shape:
/// letters, one underscore, letters (e.g. "kor_Hang", "eng_Latn").
bool is_valid_language_code(std::string_view code);

/// Human-readable name for a known code (e.g. "kor_Hang" -> "Korean").
/// Unknown codes yield nullopt; callers usually fall back to the code.
std::optional<std::string> display_name_for(std::string_view code);

/// A language identified by a FLORES-200-style code plus the display name
/// used when rendering prompts. Equality is on the code alone.
struct LanguageCode {
    std::string code;
    std::string display_name;

    LanguageCode() = default;

    /// Validates the code shape and resolves the display name from the
    /// registry (falling back to the code itself for unknown languages).
    explicit LanguageCode(std::string code_);

    /// Validates the code shape and keeps the caller's display name.
    LanguageCode(std::string code_, std::string display_name_);

    bool operator==(const LanguageCode& other) const { return code == other.code; }
    bool operator!=(const LanguageCode& other) const { return code != other.code; }
    bool operator<(const LanguageCode& other) const { return code < other.code; }
};

enum class PathKind { Direct, Pivot };

/// A route through the translation backend: either the direct
/// source->target hop or a two-hop source->pivot->target composition.
struct TranslationPath {
    PathKind kind = PathKind::Direct;
    std::optional<LanguageCode> pivot;  // present exactly when kind == Pivot
    LanguageCode source_lang;
    LanguageCode target_lang;

    TranslationPath() = default;

    static TranslationPath direct(LanguageCode source, LanguageCode target);
    static TranslationPath via(LanguageCode pivot, LanguageCode source, LanguageCode target);

    bool is_direct() const { return kind == PathKind::Direct; }

    /// Stable short identifier used in score tables, config files and
    /// EnsembleOutput.inputs_used: "direct" or the pivot's code.
    std::string code() const;

    /// Structural equality: Direct(ko,it) != Pivot(ko,it via eng), and
    /// pivot paths with different pivots are distinct.
    bool operator==(const TranslationPath& other) const;
    bool operator!=(const TranslationPath& other) const { return !(*this == other); }
};

/// Builds the path named by `code` ("direct" or a pivot language code)
/// for the given language pair. Throws ConfigError on an invalid
/// combination (unknown shape, pivot equal to source or target).
TranslationPath path_from_code(const std::string& code, const LanguageCode& source,
                               const LanguageCode& target);

/// One source-language sentence with a corpus-stable identifier.
struct SourceSegment {
    std::string id;
    std::string text;
    LanguageCode lang;
};

/// A target-language hypothesis tagged with the path that produced it.
/// Pivot candidates keep the intermediate pivot-language text for audit.
struct Candidate {
    std::string text;
    TranslationPath path;
    std::string segment_id;
    std::optional<std::string> intermediate;  // present exactly for pivot paths
};

/// The candidate pool C = {c_1..c_n} for one segment: at most one
/// candidate per configured path, ordered by the path priority list.
struct CandidatePool {
    std::string segment_id;
    std::vector<Candidate> candidates;
    std::vector<TranslationPath> path_order;
};

/// Candidate plus its quality-estimation score.
struct ScoredCandidate {
    Candidate candidate;
    double score = 0.0;
};

enum class MergeStrategy { LlmFusion, SelectionTop1, Mbr, FixedPaths };

/// Wire/artifact name of a strategy ("llm_fusion", "selection_top1",
/// "mbr", "fixed_paths") and its inverse. Throws ConfigError on unknown
/// names.
std::string strategy_name(MergeStrategy strategy);
MergeStrategy strategy_from_name(const std::string& name);

/// The final translation for one segment plus provenance: which
/// candidates (by path code) were merged and how.
struct EnsembleOutput {
    std::string segment_id;
    std::string text;
    MergeStrategy strategy = MergeStrategy::SelectionTop1;
    std::vector<std::string> inputs_used;  // path codes of the merged candidates
    int k = 0;                             // == |inputs_used|
};

/// Result of validate_pool: invariant violations are data, not faults.
struct PoolValidation {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Checks every CandidatePool invariant and reports each violation:
/// pool size bounds, duplicate paths, candidates off the configured
/// path list or out of path order, intermediate-text presence, and
/// segment-id agreement.
PoolValidation validate_pool(const CandidatePool& pool);

// JSON round-trip (nlohmann ADL hooks). Serialization is canonical:
// optional fields are omitted when absent, enums use their wire names.
void to_json(nlohmann::json& j, const LanguageCode& lang);
void from_json(const nlohmann::json& j, LanguageCode& lang);
void to_json(nlohmann::json& j, const TranslationPath& path);
void from_json(const nlohmann::json& j, TranslationPath& path);
void to_json(nlohmann::json& j, const SourceSegment& segment);
void from_json(const nlohmann::json& j, SourceSegment& segment);
void to_json(nlohmann::json& j, const Candidate& candidate);
void from_json(const nlohmann::json& j, Candidate& candidate);
void to_json(nlohmann::json& j, const CandidatePool& pool);
void from_json(const nlohmann::json& j, CandidatePool& pool);
void to_json(nlohmann::json& j, const ScoredCandidate& scored);
void from_json(const nlohmann::json& j, ScoredCandidate& scored);
void to_json(nlohmann::json& j, const EnsembleOutput& output);
void from_json(const nlohmann::json& j, EnsembleOutput& output);

}  // namespace pivotmt
