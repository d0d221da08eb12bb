#include "pivotmt/path_selection.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pivotmt/errors.hpp"
#include "pivotmt/generation.hpp"
#include "pivotmt/metrics.hpp"

namespace pivotmt {

using nlohmann::json;

std::string selection_metric_name(SelectionMetric metric) {
    switch (metric) {
        case SelectionMetric::Bleu:
            return "bleu";
        case SelectionMetric::QeScore:
            return "qe_score";
    }
    throw ConfigError("unknown selection metric value");
}

SelectionMetric selection_metric_from_name(const std::string& name) {
    if (name == "bleu") {
        return SelectionMetric::Bleu;
    }
    if (name == "qe_score") {
        return SelectionMetric::QeScore;
    }
    throw ConfigError("unknown selection metric: " + name);
}

void PathScoreTable::validate() const {
    if (rows.empty()) {
        throw ConfigError("path score table has no rows");
    }
    bool has_direct = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const PathScoreRow& row = rows[i];
        if (!std::isfinite(row.score)) {
            throw ConfigError("path score table: non-finite score for " + row.path.code());
        }
        if (!(row.path.source_lang == source_lang) || !(row.path.target_lang == target_lang)) {
            throw ConfigError("path score table: row " + row.path.code() +
                              " does not match the table's language pair");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (rows[j].path == row.path) {
                throw ConfigError("path score table: duplicate row " + row.path.code());
            }
        }
        has_direct = has_direct || row.path.is_direct();
    }
    if (!has_direct) {
        throw ConfigError("path score table lacks a direct-path row");
    }
}

namespace {

// "Better-than" ordering: score descending, direct path winning ties, then
// pivot codes ascending.
bool row_before(const PathScoreRow& a, const PathScoreRow& b) {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    if (a.path.is_direct() != b.path.is_direct()) {
        return a.path.is_direct();
    }
    return a.path.code() < b.path.code();
}

}  // namespace

PathScoreTable score_paths(const std::vector<SourceSegment>& sources,
                           const std::vector<std::string>& references,
                           const std::vector<LanguageCode>& pivot_pool,
                           const LanguageCode& target_lang, TranslationBackend& backend,
                           SelectionMetric metric, QeScorer* qe, Cache* cache,
                           std::size_t parallelism) {
    if (sources.empty()) {
        throw EmptyCorpus("score_paths: empty benchmark");
    }
    if (sources.size() != references.size()) {
        throw InputMismatch("score_paths: " + std::to_string(sources.size()) +
                            " sources vs " + std::to_string(references.size()) +
                            " references");
    }
    if (metric == SelectionMetric::QeScore && qe == nullptr) {
        throw ConfigError("score_paths: QeScore metric requires a QE scorer");
    }
    const LanguageCode source_lang = sources.front().lang;
    std::vector<TranslationPath> paths;
    paths.push_back(TranslationPath::direct(source_lang, target_lang));
    for (const auto& pivot : pivot_pool) {
        // via() rejects pivot == source or pivot == target with ConfigError.
        paths.push_back(TranslationPath::via(pivot, source_lang, target_lang));
    }

    const CorpusGeneration run = generate_corpus(sources, paths, backend, cache, parallelism);

    std::unordered_map<std::string, std::size_t> ref_by_segment;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        ref_by_segment[sources[i].id] = i;
    }

    PathScoreTable table;
    table.source_lang = source_lang;
    table.target_lang = target_lang;
    table.metric = metric;
    for (const auto& path : paths) {
        std::vector<std::string> hypotheses;
        std::vector<std::string> refs;
        std::vector<std::string> source_texts;
        for (const auto& pool : run.pools) {
            for (const auto& candidate : pool.candidates) {
                if (candidate.path == path) {
                    hypotheses.push_back(candidate.text);
                    const std::size_t i = ref_by_segment.at(pool.segment_id);
                    refs.push_back(references[i]);
                    source_texts.push_back(sources[i].text);
                    break;
                }
            }
        }
        if (hypotheses.size() != sources.size()) {
            const std::size_t failed = sources.size() - hypotheses.size();
            std::cerr << "warning: path " << path.code() << " omitted from score table: failed on "
                      << failed << "/" << sources.size() << " segments\n";
            if (path.is_direct()) {
                throw BackendUnavailable(
                    "direct path failed on the benchmark; cannot build a path score table");
            }
            continue;
        }
        double score = 0.0;
        if (metric == SelectionMetric::Bleu) {
            score = corpus_bleu(hypotheses, refs);
        } else {
            const std::vector<double> qe_scores = qe->score_batch(source_texts, hypotheses);
            for (const double s : qe_scores) {
                score += s;
            }
            score /= static_cast<double>(qe_scores.size());
        }
        table.rows.push_back({path, score});
    }
    table.validate();
    return table;
}

std::vector<TranslationPath> select_top_paths(const PathScoreTable& table, std::size_t n,
                                              bool force_include_direct) {
    table.validate();
    if (n < 1) {
        throw ConfigError("select_top_paths: n must be >= 1");
    }
    if (n > table.rows.size()) {
        throw InsufficientPaths("requested " + std::to_string(n) + " paths but the table has " +
                                std::to_string(table.rows.size()));
    }
    std::vector<PathScoreRow> sorted = table.rows;
    std::sort(sorted.begin(), sorted.end(), row_before);
    std::vector<PathScoreRow> selected(sorted.begin(),
                                       sorted.begin() + static_cast<std::ptrdiff_t>(n));

    if (force_include_direct) {
        const bool has_direct = std::any_of(selected.begin(), selected.end(),
                                            [](const PathScoreRow& r) {
                                                return r.path.is_direct();
                                            });
        if (!has_direct) {
            const auto direct_row = std::find_if(sorted.begin(), sorted.end(),
                                                 [](const PathScoreRow& r) {
                                                     return r.path.is_direct();
                                                 });
            selected.back() = *direct_row;  // swap in for the weakest selection
            std::sort(selected.begin(), selected.end(), row_before);
        }
    }

    std::vector<TranslationPath> out;
    out.reserve(selected.size());
    for (const auto& row : selected) {
        out.push_back(row.path);
    }
    return out;
}

void save_path_table(const PathScoreTable& table, const std::filesystem::path& tsv_path) {
    table.validate();
    std::string body;
    for (const auto& row : table.rows) {
        body += row.path.code();
        body += '\t';
        body += json(row.score).dump();  // shortest round-trip decimal form
        body += '\n';
    }
    atomic_write_file(tsv_path, body);

    const json meta = {{"metric", selection_metric_name(table.metric)},
                       {"source_lang", table.source_lang.code},
                       {"target_lang", table.target_lang.code}};
    atomic_write_file(tsv_path.string() + ".meta.json", canonical_json(meta) + "\n");
}

PathScoreTable load_path_table(const std::filesystem::path& tsv_path) {
    const std::string meta_path = tsv_path.string() + ".meta.json";
    json meta;
    try {
        meta = json::parse(read_file(meta_path));
    } catch (const json::parse_error& e) {
        throw ParseError(meta_path + ": " + e.what());
    }
    PathScoreTable table;
    try {
        table.source_lang = LanguageCode{meta.at("source_lang").get<std::string>()};
        table.target_lang = LanguageCode{meta.at("target_lang").get<std::string>()};
    } catch (const json::exception& e) {
        throw ParseError(meta_path + ": " + e.what());
    }
    const std::string metric_name = meta.value("metric", "");
    if (metric_name == "bleu") {
        table.metric = SelectionMetric::Bleu;
    } else if (metric_name == "qe_score") {
        table.metric = SelectionMetric::QeScore;
    } else {
        throw ParseError(meta_path + ": unknown metric \"" + metric_name + "\"");
    }

    const std::vector<std::string> lines = read_lines(tsv_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty()) {
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(tsv_path.string() + ": expected code<TAB>score", i + 1);
        }
        const std::string code = line.substr(0, tab);
        const std::string score_text = line.substr(tab + 1);
        PathScoreRow row;
        try {
            row.path = path_from_code(code, table.source_lang, table.target_lang);
        } catch (const Error& e) {
            throw ParseError(tsv_path.string() + ": " + e.what(), i + 1);
        }
        std::size_t consumed = 0;
        try {
            row.score = std::stod(score_text, &consumed);
        } catch (const std::exception&) {
            throw ParseError(tsv_path.string() + ": bad score \"" + score_text + "\"", i + 1);
        }
        if (consumed != score_text.size()) {
            throw ParseError(tsv_path.string() + ": bad score \"" + score_text + "\"", i + 1);
        }
        table.rows.push_back(row);
    }
    table.validate();
    return table;
}

}  // namespace pivotmt
