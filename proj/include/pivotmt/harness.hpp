#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pivotmt/backend.hpp"
#include "pivotmt/core.hpp"
#include "pivotmt/generation.hpp"
#include "pivotmt/merging.hpp"
#include "pivotmt/metrics.hpp"
#include "pivotmt/qe_ranking.hpp"
#include "pivotmt/storage.hpp"

namespace pivotmt {

/// Version string stamped into manifests and printed by --version.
inline constexpr const char* kToolVersion = "0.1.0";

/// Which quality-estimation scorer a pipeline run uses: the offline
/// lexical proxy (default — no service needed) or an external HTTP
/// scoring service.
struct QeSpec {
    enum class Kind { Lexical, External };
    Kind kind = Kind::Lexical;
    BackendConfig backend;  // External only

    void validate() const;
};

/// Merge-stage configuration: the strategy plus its strategy-specific
/// knobs (the fixed path list, the MBR utility).
struct MergerSpec {
    MergeStrategy strategy = MergeStrategy::SelectionTop1;
    std::vector<std::string> fixed_path_codes;  // FixedPaths only
    MbrConfig::Utility mbr_utility = MbrConfig::Utility::ChrfPP;
    bool mbr_symmetrize = false;

    void validate() const;
};

/// Resolved pipeline configuration. The config-file key set:
///   languages   {"source","target"}
///   paths       explicit path-code list — XOR —
///   path_table  score-table TSV plus n (take the top n)
///   k           candidates kept per segment after ranking (default 3)
///   qe          {"type":"lexical"} or {"type":"external","backend":{…}}
///   merger      {"strategy":…, ["paths":…], ["mbr_utility":…], ["mbr_symmetrize":…]}
///   backends    {"translation": BackendConfig}
///   parallelism segment/path worker bound (default 1)
///   failure_budget  tolerated fraction of failed segments (default 0)
///   cache_dir   optional content-addressed cache directory
/// Relative path_table/cache_dir values are resolved against the config
/// file's directory by load_pipeline_config.
struct PipelineConfig {
    LanguageCode source_lang;
    LanguageCode target_lang;
    std::vector<std::string> path_codes;
    std::filesystem::path path_table;
    std::size_t n = 0;
    std::size_t k = 3;
    QeSpec qe;
    MergerSpec merger;
    BackendConfig translation_backend;
    std::size_t parallelism = 1;
    double failure_budget = 0.0;
    std::filesystem::path cache_dir;

    void validate() const;

    /// The paths this run translates through: the explicit list, or the
    /// top n of the score table. Throws ConfigError / table load errors.
    std::vector<TranslationPath> resolve_paths() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& config);
void from_json(const nlohmann::json& j, PipelineConfig& config);

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Artifact names inside a run directory. Every stage reads its inputs
/// and writes its outputs here, so staged and monolithic runs are
/// file-by-file comparable.
struct RunLayout {
    std::filesystem::path dir;

    std::filesystem::path segments() const { return dir / "segments.jsonl"; }
    std::filesystem::path pools() const { return dir / "pools.jsonl"; }
    std::filesystem::path generation_report() const { return dir / "generation_report.json"; }
    std::filesystem::path scored() const { return dir / "scored.jsonl"; }
    std::filesystem::path outputs() const { return dir / "outputs.jsonl"; }
    std::filesystem::path failures() const { return dir / "failures.json"; }
    std::filesystem::path manifest() const { return dir / "manifest.json"; }
    std::filesystem::path eval_report() const { return dir / "report.json"; }
    std::filesystem::path segment_scores() const { return dir / "segment_scores.tsv"; }
};

/// One segment's scored pool as persisted in scored.jsonl: every
/// candidate, highest score first, plus the k the merge stage consumes
/// (already clamped to the pool size).
struct ScoredPool {
    std::string segment_id;
    std::vector<ScoredCandidate> ranked;
    std::size_t k = 0;
};

void to_json(nlohmann::json& j, const ScoredPool& pool);
void from_json(const nlohmann::json& j, ScoredPool& pool);

/// A per-segment pipeline failure (generation wipe-out or merge error).
/// These are data, not faults: the run aborts only when their fraction
/// exceeds the configured failure budget.
struct SegmentFailure {
    std::string segment_id;
    std::string stage;  // "generation" | "merge"
    std::string reason;
};

void to_json(nlohmann::json& j, const SegmentFailure& failure);
void from_json(const nlohmann::json& j, SegmentFailure& failure);

struct PipelineResult {
    std::vector<EnsembleOutput> outputs;  // corpus order, failed segments omitted
    RunManifest manifest;
    std::vector<SegmentFailure> failures;
    std::vector<PathFailure> path_failures;  // non-fatal per-path detail
};

// --- pipeline stages --------------------------------------------------------
// The monolithic run is exactly these three stages composed in memory; the
// CLI's generate/rank/merge commands invoke them one at a time, reloading the
// intermediates from disk, so both modes write byte-identical artifacts.
// A null backend/scorer is constructed from the config (and cache-wrapped
// when cache_dir is set); injected ones are cache-wrapped the same way.

struct GenerationStageResult {
    std::vector<CandidatePool> pools;
    GenerationReport report;
};

/// Generation: writes segments.jsonl, pools.jsonl, generation_report.json.
GenerationStageResult stage_generate(const std::vector<SourceSegment>& corpus,
                                     const PipelineConfig& config, const RunLayout& layout,
                                     TranslationBackend* backend = nullptr);

/// QE ranking: writes scored.jsonl (full pools, descending, k clamped
/// per pool with a stderr warning).
std::vector<ScoredPool> stage_rank(const std::vector<SourceSegment>& corpus,
                                   const std::vector<CandidatePool>& pools,
                                   const PipelineConfig& config, const RunLayout& layout,
                                   QeScorer* qe = nullptr);

/// Merging plus run accounting: writes outputs.jsonl, failures.json and
/// manifest.json, then enforces the failure budget (GenerationFailed when
/// exceeded — artifacts are still on disk for inspection).
PipelineResult stage_merge(const std::vector<SourceSegment>& corpus,
                           const std::vector<CandidatePool>& pools,
                           const std::vector<ScoredPool>& scored,
                           const GenerationReport& generation_report,
                           const PipelineConfig& config, const RunLayout& layout,
                           TranslationBackend* backend = nullptr);

/// End-to-end run: generation → ranking → merging per segment, all
/// intermediates persisted under out_dir. With the mock backend this is
/// a pure function of (corpus, config) — byte-identical artifacts across
/// reruns and parallelism settings.
PipelineResult run_pipeline(const std::vector<SourceSegment>& corpus,
                            const PipelineConfig& config, const std::filesystem::path& out_dir,
                            TranslationBackend* backend = nullptr, QeScorer* qe = nullptr);

/// SHA-256 fingerprint over the corpus's canonical JSONL bytes (equal to
/// hashing the segments.jsonl file a run writes).
std::string corpus_fingerprint(const std::vector<SourceSegment>& corpus);

// --- evaluation ---------------------------------------------------------------

struct EvalConfig {
    std::string system_name = "pipeline";
    LanguageCode target_lang;  // drives the Korean tokenizer fallback note
    BleuConfig bleu;
    ChrfConfig chrf;
    /// External column scorer; reports mark the column unavailable when
    /// null. The scorer receives the reference in its source slot
    /// (reference-based scoring mode).
    QeScorer* qe = nullptr;
};

/// Corpus scores for one system plus per-segment dumps (smoothed
/// sentence BLEU and sentence chrF++) and layout notes.
struct EvalReport {
    std::string system;
    std::string corpus_fingerprint;  // over the reference lines
    std::size_t segment_count = 0;
    double bleu = 0.0;
    double chrf = 0.0;
    std::optional<double> qe;  // mean external score; nullopt = unavailable
    std::vector<double> segment_bleu;
    std::vector<double> segment_chrf;
    std::vector<std::string> notes;
};

void to_json(nlohmann::json& j, const EvalReport& report);
void from_json(const nlohmann::json& j, EvalReport& report);

/// Corpus BLEU and chrF++ over aligned outputs/references, plus the
/// external column when a scorer is configured. Korean targets fall back
/// to the Whitespace BLEU tokenizer (the morphological tokenizer is an
/// external tool) and the report records that note.
EvalReport evaluate(const std::vector<EnsembleOutput>& outputs,
                    const std::vector<std::string>& references, const EvalConfig& config);

/// References aligned to the surviving outputs: references[i] pairs with
/// corpus[i], and failed segments' references are dropped. Throws
/// InputMismatch when lengths or segment ids do not line up.
std::vector<std::string> align_references(const std::vector<SourceSegment>& corpus,
                                          const std::vector<std::string>& references,
                                          const std::vector<EnsembleOutput>& outputs);

/// Per-segment score dump: "segment_id\tbleu\tchrf" rows, full precision.
void save_segment_scores(const std::filesystem::path& path,
                         const std::vector<EnsembleOutput>& outputs, const EvalReport& report);

/// Multi-system comparison preserving input order; all reports must
/// share the corpus fingerprint (CorpusMismatch otherwise).
struct ComparisonTable {
    std::vector<EvalReport> systems;

    /// "| Model | BLEU | chrF++ | COMET |" rows; the best value per
    /// column is bold, ties bold every maximizer, scores display
    /// rounded half-up to 2 decimals.
    std::string to_markdown() const;
    /// Same layout as TSV; best-per-column cells carry a trailing '*'.
    std::string to_tsv() const;
};

ComparisonTable compare_systems(const std::vector<EvalReport>& reports);

/// Display rounding used by the table emitters: half-up to 2 decimals.
std::string format_score(double value);

}  // namespace pivotmt
