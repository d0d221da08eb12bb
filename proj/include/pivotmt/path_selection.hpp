#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "pivotmt/backend.hpp"
#include "pivotmt/core.hpp"
#include "pivotmt/qe_ranking.hpp"
#include "pivotmt/storage.hpp"

namespace pivotmt {

// Metric used to score candidate paths on a benchmark corpus: reference-based
// BLEU or a reference-free QE score averaged over segments.
enum class SelectionMetric { Bleu, QeScore };

std::string selection_metric_name(SelectionMetric metric);
SelectionMetric selection_metric_from_name(const std::string& name);

struct PathScoreRow {
    TranslationPath path;
    double score = 0.0;
};

// Benchmark scores for every candidate path of one language pair. Always
// contains a direct-path row; scores are finite.
struct PathScoreTable {
    LanguageCode source_lang;
    LanguageCode target_lang;
    std::vector<PathScoreRow> rows;
    SelectionMetric metric = SelectionMetric::Bleu;

    void validate() const;
};

// Translate the benchmark through the direct path and one pivot path per pool
// entry, then score each path's outputs corpus-wise. A path that failed on any
// segment is omitted from the table with a warning — a partial corpus would
// not be comparable. `qe` is required for the QeScore metric.
PathScoreTable score_paths(const std::vector<SourceSegment>& sources,
                           const std::vector<std::string>& references,
                           const std::vector<LanguageCode>& pivot_pool,
                           const LanguageCode& target_lang, TranslationBackend& backend,
                           SelectionMetric metric = SelectionMetric::Bleu,
                           QeScorer* qe = nullptr, Cache* cache = nullptr,
                           std::size_t parallelism = 1);

// The n best-scoring paths, descending. Ties: direct path first, then pivot
// codes ascending. With force_include_direct, the direct path replaces the
// weakest selected path when it did not qualify on score.
std::vector<TranslationPath> select_top_paths(const PathScoreTable& table, std::size_t n,
                                              bool force_include_direct = false);

// TSV persistence: one "path-code<TAB>score" row per line, plus a
// "<file>.meta.json" sidecar carrying metric and language pair.
void save_path_table(const PathScoreTable& table, const std::filesystem::path& tsv_path);
PathScoreTable load_path_table(const std::filesystem::path& tsv_path);

}  // namespace pivotmt
