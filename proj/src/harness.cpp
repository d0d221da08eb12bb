#include "pivotmt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <thread>
#include <utility>

#include "pivotmt/path_selection.hpp"

namespace pivotmt {

using nlohmann::json;

namespace {

std::string mbr_utility_name(MbrConfig::Utility utility) {
    switch (utility) {
        case MbrConfig::Utility::ChrfPP: return "chrf_pp";
        case MbrConfig::Utility::BleuSentence: return "bleu_sentence";
    }
    throw ConfigError("unknown MBR utility");
}

MbrConfig::Utility mbr_utility_from_name(const std::string& name) {
    if (name == "chrf_pp") {
        return MbrConfig::Utility::ChrfPP;
    }
    if (name == "bleu_sentence") {
        return MbrConfig::Utility::BleuSentence;
    }
    throw ConfigError("unknown MBR utility: " + name);
}

json qe_to_json(const QeSpec& qe) {
    if (qe.kind == QeSpec::Kind::Lexical) {
        return json{{"type", "lexical"}};
    }
    return json{{"type", "external"}, {"backend", qe.backend}};
}

QeSpec qe_from_json(const json& j) {
    QeSpec qe;
    const std::string type = j.at("type").get<std::string>();
    if (type == "lexical") {
        qe.kind = QeSpec::Kind::Lexical;
    } else if (type == "external") {
        qe.kind = QeSpec::Kind::External;
        qe.backend = j.at("backend").get<BackendConfig>();
    } else {
        throw ConfigError("unknown qe type: " + type);
    }
    return qe;
}

json merger_to_json(const MergerSpec& merger) {
    json j{{"strategy", strategy_name(merger.strategy)}};
    if (merger.strategy == MergeStrategy::FixedPaths) {
        j["paths"] = merger.fixed_path_codes;
    }
    if (merger.strategy == MergeStrategy::Mbr) {
        j["mbr_utility"] = mbr_utility_name(merger.mbr_utility);
        j["mbr_symmetrize"] = merger.mbr_symmetrize;
    }
    return j;
}

MergerSpec merger_from_json(const json& j) {
    MergerSpec merger;
    merger.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    merger.fixed_path_codes = j.value("paths", std::vector<std::string>{});
    merger.mbr_utility = mbr_utility_from_name(j.value("mbr_utility", std::string("chrf_pp")));
    merger.mbr_symmetrize = j.value("mbr_symmetrize", false);
    return merger;
}

std::unique_ptr<Cache> open_cache(const PipelineConfig& config) {
    if (config.cache_dir.empty()) {
        return nullptr;
    }
    return std::make_unique<Cache>(config.cache_dir);
}

/// Runs `task(i)` for every index in waves of at most `parallelism`
/// threads; each task fills its own slot, so results are
/// schedule-independent. The first worker exception is rethrown.
template <typename Task>
void run_in_waves(std::size_t count, std::size_t parallelism, Task&& task) {
    std::vector<std::exception_ptr> errors(count);
    for (std::size_t base = 0; base < count; base += parallelism) {
        const std::size_t wave_end = std::min(base + parallelism, count);
        std::vector<std::thread> wave;
        for (std::size_t i = base; i < wave_end; ++i) {
            wave.emplace_back([&, i] {
                try {
                    task(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
        for (auto& thread : wave) {
            thread.join();
        }
    }
    for (const auto& error : errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }
}

std::map<std::string, const SourceSegment*> index_segments(
    const std::vector<SourceSegment>& corpus) {
    std::map<std::string, const SourceSegment*> by_id;
    for (const auto& segment : corpus) {
        by_id[segment.id] = &segment;
    }
    return by_id;
}

const SourceSegment& segment_for(const std::map<std::string, const SourceSegment*>& by_id,
                                 const std::string& segment_id) {
    const auto it = by_id.find(segment_id);
    if (it == by_id.end()) {
        throw InputMismatch("artifact references segment " + segment_id +
                            " which is not in the corpus");
    }
    return *it->second;
}

}  // namespace

void QeSpec::validate() const {
    if (kind == Kind::External) {
        backend.validate();
    }
}

void MergerSpec::validate() const {
    if (strategy == MergeStrategy::FixedPaths) {
        if (fixed_path_codes.empty()) {
            throw ConfigError("fixed_paths strategy needs at least one path code");
        }
        std::set<std::string> seen;
        for (const auto& code : fixed_path_codes) {
            if (!seen.insert(code).second) {
                throw ConfigError("duplicate fixed path code: " + code);
            }
        }
    } else if (!fixed_path_codes.empty()) {
        throw ConfigError("merger paths are only meaningful for the fixed_paths strategy");
    }
}

void PipelineConfig::validate() const {
    if (source_lang.code.empty() || target_lang.code.empty()) {
        throw ConfigError("pipeline config needs source and target languages");
    }
    if (source_lang == target_lang) {
        throw ConfigError("source and target language must differ");
    }
    const bool has_codes = !path_codes.empty();
    const bool has_table = !path_table.empty();
    if (has_codes == has_table) {
        throw ConfigError("configure exactly one of \"paths\" and \"path_table\"");
    }
    if (has_table && n < 1) {
        throw ConfigError("path_table selection needs n >= 1");
    }
    if (k < 1) {
        throw ConfigError("k must be >= 1");
    }
    if (parallelism < 1) {
        throw ConfigError("parallelism must be >= 1");
    }
    if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) {
        throw ConfigError("failure_budget must be within [0, 1]");
    }
    qe.validate();
    merger.validate();
    translation_backend.validate();
}

std::vector<TranslationPath> PipelineConfig::resolve_paths() const {
    validate();
    if (!path_codes.empty()) {
        std::vector<TranslationPath> paths;
        paths.reserve(path_codes.size());
        for (const auto& code : path_codes) {
            paths.push_back(path_from_code(code, source_lang, target_lang));
        }
        return paths;
    }
    const PathScoreTable table = load_path_table(path_table);
    if (table.source_lang != source_lang || table.target_lang != target_lang) {
        throw ConfigError("path table " + path_table.string() + " is for " +
                          table.source_lang.code + "->" + table.target_lang.code +
                          ", config wants " + source_lang.code + "->" + target_lang.code);
    }
    return select_top_paths(table, n);
}

void to_json(json& j, const PipelineConfig& config) {
    j = json{{"languages",
              {{"source", config.source_lang.code}, {"target", config.target_lang.code}}},
             {"k", config.k},
             {"qe", qe_to_json(config.qe)},
             {"merger", merger_to_json(config.merger)},
             {"backends", {{"translation", config.translation_backend}}},
             {"parallelism", config.parallelism},
             {"failure_budget", config.failure_budget}};
    if (!config.path_codes.empty()) {
        j["paths"] = config.path_codes;
    } else {
        j["path_table"] = config.path_table.string();
        j["n"] = config.n;
    }
    if (!config.cache_dir.empty()) {
        j["cache_dir"] = config.cache_dir.string();
    }
}

void from_json(const json& j, PipelineConfig& config) {
    try {
        const auto& languages = j.at("languages");
        config.source_lang = LanguageCode(languages.at("source").get<std::string>());
        config.target_lang = LanguageCode(languages.at("target").get<std::string>());
        config.path_codes = j.value("paths", std::vector<std::string>{});
        config.path_table = j.value("path_table", std::string{});
        config.n = j.value("n", std::size_t{0});
        config.k = j.value("k", std::size_t{3});
        config.qe = j.contains("qe") ? qe_from_json(j.at("qe")) : QeSpec{};
        config.merger = j.contains("merger") ? merger_from_json(j.at("merger")) : MergerSpec{};
        config.translation_backend =
            j.at("backends").at("translation").get<BackendConfig>();
        config.parallelism = j.value("parallelism", std::size_t{1});
        config.failure_budget = j.value("failure_budget", 0.0);
        config.cache_dir = j.value("cache_dir", std::string{});
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad pipeline config: ") + e.what());
    }
    config.validate();
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    json parsed;
    try {
        parsed = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    PipelineConfig config = parsed.get<PipelineConfig>();
    // Relative paths in a config file mean "next to the config file".
    const std::filesystem::path base = path.parent_path();
    if (!config.path_table.empty() && config.path_table.is_relative()) {
        config.path_table = base / config.path_table;
    }
    if (!config.cache_dir.empty() && config.cache_dir.is_relative()) {
        config.cache_dir = base / config.cache_dir;
    }
    return config;
}

void to_json(json& j, const ScoredPool& pool) {
    j = json{{"segment_id", pool.segment_id}, {"ranked", pool.ranked}, {"k", pool.k}};
}

void from_json(const json& j, ScoredPool& pool) {
    pool.segment_id = j.at("segment_id").get<std::string>();
    pool.ranked = j.at("ranked").get<std::vector<ScoredCandidate>>();
    pool.k = j.at("k").get<std::size_t>();
}

void to_json(json& j, const SegmentFailure& failure) {
    j = json{{"segment_id", failure.segment_id},
             {"stage", failure.stage},
             {"reason", failure.reason}};
}

void from_json(const json& j, SegmentFailure& failure) {
    failure.segment_id = j.at("segment_id").get<std::string>();
    failure.stage = j.at("stage").get<std::string>();
    failure.reason = j.at("reason").get<std::string>();
}

std::string corpus_fingerprint(const std::vector<SourceSegment>& corpus) {
    std::string bytes;
    for (const auto& segment : corpus) {
        bytes += canonical_json(json(segment));
        bytes += '\n';
    }
    return sha256_hex(bytes);
}

GenerationStageResult stage_generate(const std::vector<SourceSegment>& corpus,
                                     const PipelineConfig& config, const RunLayout& layout,
                                     TranslationBackend* backend) {
    config.validate();
    const std::vector<TranslationPath> paths = config.resolve_paths();
    const std::unique_ptr<Cache> cache = open_cache(config);
    std::unique_ptr<TranslationBackend> owned;
    if (backend == nullptr) {
        owned = make_backend(config.translation_backend);
        backend = owned.get();
    }
    CorpusGeneration run =
        generate_corpus(corpus, paths, *backend, cache.get(), config.parallelism);
    write_jsonl(layout.segments(), corpus);
    write_jsonl(layout.pools(), run.pools);
    atomic_write_file(layout.generation_report(), canonical_json(json(run.report)) + "\n");
    return {std::move(run.pools), std::move(run.report)};
}

std::vector<ScoredPool> stage_rank(const std::vector<SourceSegment>& corpus,
                                   const std::vector<CandidatePool>& pools,
                                   const PipelineConfig& config, const RunLayout& layout,
                                   QeScorer* qe) {
    config.validate();
    const auto by_id = index_segments(corpus);
    const std::unique_ptr<Cache> cache = open_cache(config);
    std::unique_ptr<QeScorer> owned;
    if (qe == nullptr) {
        if (config.qe.kind == QeSpec::Kind::External) {
            owned = std::make_unique<ExternalQe>(config.qe.backend);
        } else {
            owned = std::make_unique<LexicalProxyQe>();
        }
        qe = owned.get();
    }
    std::optional<CachingQe> caching;
    if (cache) {
        caching.emplace(*qe, *cache);
    }
    QeScorer& effective = caching ? static_cast<QeScorer&>(*caching) : *qe;

    std::vector<ScoredPool> out(pools.size());
    run_in_waves(pools.size(), config.parallelism, [&](std::size_t p) {
        const CandidatePool& pool = pools[p];
        const SourceSegment& segment = segment_for(by_id, pool.segment_id);
        const std::vector<ScoredCandidate> scored = score_pool(segment, pool, effective);
        std::vector<double> scores;
        scores.reserve(scored.size());
        for (const auto& entry : scored) {
            scores.push_back(entry.score);
        }
        const std::vector<std::size_t> order = descending_order(scores);
        ScoredPool ranked{pool.segment_id, {}, std::min(config.k, scored.size())};
        ranked.ranked.reserve(scored.size());
        for (const std::size_t index : order) {
            ranked.ranked.push_back(scored[index]);
        }
        out[p] = std::move(ranked);
    });
    // Clamp warnings after the join so they come out in corpus order.
    for (const auto& pool : out) {
        if (pool.k < config.k) {
            std::cerr << "warning: segment " << pool.segment_id << " pool has "
                      << pool.ranked.size() << " candidates; clamping k from " << config.k
                      << " to " << pool.k << "\n";
        }
    }
    write_jsonl(layout.scored(), out);
    return out;
}

PipelineResult stage_merge(const std::vector<SourceSegment>& corpus,
                           const std::vector<CandidatePool>& pools,
                           const std::vector<ScoredPool>& scored,
                           const GenerationReport& generation_report,
                           const PipelineConfig& config, const RunLayout& layout,
                           TranslationBackend* backend) {
    config.validate();
    const std::vector<TranslationPath> run_paths = config.resolve_paths();
    const auto by_id = index_segments(corpus);
    std::map<std::string, const CandidatePool*> pools_by_id;
    for (const auto& pool : pools) {
        pools_by_id[pool.segment_id] = &pool;
    }

    std::vector<TranslationPath> fixed;
    if (config.merger.strategy == MergeStrategy::FixedPaths) {
        for (const auto& code : config.merger.fixed_path_codes) {
            TranslationPath path = path_from_code(code, config.source_lang, config.target_lang);
            if (std::find(run_paths.begin(), run_paths.end(), path) == run_paths.end()) {
                throw ConfigError("fixed path " + code + " is not among the run's paths");
            }
            fixed.push_back(std::move(path));
        }
    }
    MbrConfig mbr;
    mbr.utility = config.merger.mbr_utility;
    mbr.symmetrize = config.merger.mbr_symmetrize;

    const std::unique_ptr<Cache> cache = open_cache(config);
    std::unique_ptr<TranslationBackend> owned;
    if (backend == nullptr) {
        owned = make_backend(config.translation_backend);
        backend = owned.get();
    }
    std::optional<CachingBackend> caching;
    if (cache) {
        caching.emplace(*backend, *cache);
    }
    TranslationBackend& effective =
        caching ? static_cast<TranslationBackend&>(*caching) : *backend;

    struct MergeSlot {
        std::optional<EnsembleOutput> output;
        std::optional<SegmentFailure> failure;
    };
    std::vector<MergeSlot> slots(scored.size());
    run_in_waves(scored.size(), config.parallelism, [&](std::size_t s) {
        const ScoredPool& pool = scored[s];
        const SourceSegment& segment = segment_for(by_id, pool.segment_id);
        if (pool.k < 1 || pool.k > pool.ranked.size()) {
            throw InputMismatch("scored pool for segment " + pool.segment_id +
                                " has k out of range");
        }
        const std::vector<ScoredCandidate> top_k(pool.ranked.begin(),
                                                 pool.ranked.begin() +
                                                     static_cast<std::ptrdiff_t>(pool.k));
        try {
            switch (config.merger.strategy) {
                case MergeStrategy::LlmFusion:
                    slots[s].output = merge_llm(segment, top_k, effective);
                    break;
                case MergeStrategy::SelectionTop1:
                    slots[s].output = merge_select_top1(top_k);
                    break;
                case MergeStrategy::Mbr:
                    slots[s].output = merge_mbr_select(top_k, mbr);
                    break;
                case MergeStrategy::FixedPaths: {
                    const auto it = pools_by_id.find(pool.segment_id);
                    if (it == pools_by_id.end()) {
                        throw InputMismatch("no candidate pool for segment " + pool.segment_id);
                    }
                    slots[s].output = merge_fixed_paths(segment, *it->second, fixed, effective);
                    break;
                }
            }
        } catch (const EmptyMergeOutput& e) {
            // Per-segment data problems become budget-counted failures;
            // systemic faults (backend down, protocol breach) propagate.
            slots[s].failure = SegmentFailure{pool.segment_id, "merge", e.what()};
        } catch (const InsufficientPaths& e) {
            slots[s].failure = SegmentFailure{pool.segment_id, "merge", e.what()};
        } catch (const RenderError& e) {
            slots[s].failure = SegmentFailure{pool.segment_id, "merge", e.what()};
        }
    });

    PipelineResult result;
    result.path_failures = generation_report.path_failures;
    const std::set<std::string> generation_failed(generation_report.failed_segments.begin(),
                                                  generation_report.failed_segments.end());
    std::map<std::string, const MergeSlot*> slots_by_id;
    for (std::size_t s = 0; s < scored.size(); ++s) {
        slots_by_id[scored[s].segment_id] = &slots[s];
    }
    for (const auto& segment : corpus) {
        if (generation_failed.count(segment.id) != 0) {
            result.failures.push_back(
                SegmentFailure{segment.id, "generation", "all configured paths failed"});
            continue;
        }
        const auto it = slots_by_id.find(segment.id);
        if (it == slots_by_id.end()) {
            continue;  // segment absent from the scored artifact (partial stage input)
        }
        if (it->second->failure.has_value()) {
            result.failures.push_back(*it->second->failure);
        } else if (it->second->output.has_value()) {
            result.outputs.push_back(*it->second->output);
        }
    }

    result.manifest.tool_version = kToolVersion;
    result.manifest.created_at = utc_timestamp();
    result.manifest.config = json(config);
    result.manifest.corpus_fingerprints = {{"corpus", corpus_fingerprint(corpus)}};
    for (const auto& path : run_paths) {
        result.manifest.path_codes.push_back(path.code());
    }
    result.manifest.k = static_cast<int>(config.k);
    result.manifest.merger_strategy = strategy_name(config.merger.strategy);

    write_jsonl(layout.outputs(), result.outputs);
    atomic_write_file(layout.failures(),
                      canonical_json(json{{"segments", result.failures},
                                          {"paths", result.path_failures}}) +
                          "\n");
    save_manifest(layout.manifest(), result.manifest);

    if (!corpus.empty()) {
        const double failed_fraction =
            static_cast<double>(result.failures.size()) / static_cast<double>(corpus.size());
        if (failed_fraction > config.failure_budget) {
            throw GenerationFailed(
                "run failed: " + std::to_string(result.failures.size()) + " of " +
                std::to_string(corpus.size()) + " segments failed (budget " +
                format_score(config.failure_budget * 100.0) + "%); artifacts kept in " +
                layout.dir.string());
        }
    }
    return result;
}

PipelineResult run_pipeline(const std::vector<SourceSegment>& corpus,
                            const PipelineConfig& config, const std::filesystem::path& out_dir,
                            TranslationBackend* backend, QeScorer* qe) {
    config.validate();
    const RunLayout layout{out_dir};
    GenerationStageResult generation = stage_generate(corpus, config, layout, backend);
    const std::vector<ScoredPool> scored =
        stage_rank(corpus, generation.pools, config, layout, qe);
    return stage_merge(corpus, generation.pools, scored, generation.report, config, layout,
                       backend);
}

void to_json(json& j, const EvalReport& report) {
    j = json{{"system", report.system},
             {"corpus_fingerprint", report.corpus_fingerprint},
             {"segment_count", report.segment_count},
             {"bleu", report.bleu},
             {"chrf", report.chrf},
             {"segment_bleu", report.segment_bleu},
             {"segment_chrf", report.segment_chrf},
             {"notes", report.notes}};
    if (report.qe.has_value()) {
        j["qe"] = *report.qe;
    }
}

void from_json(const json& j, EvalReport& report) {
    report.system = j.at("system").get<std::string>();
    report.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
    report.segment_count = j.at("segment_count").get<std::size_t>();
    report.bleu = j.at("bleu").get<double>();
    report.chrf = j.at("chrf").get<double>();
    report.segment_bleu = j.at("segment_bleu").get<std::vector<double>>();
    report.segment_chrf = j.at("segment_chrf").get<std::vector<double>>();
    report.notes = j.at("notes").get<std::vector<std::string>>();
    if (j.contains("qe")) {
        report.qe = j.at("qe").get<double>();
    } else {
        report.qe.reset();
    }
}

EvalReport evaluate(const std::vector<EnsembleOutput>& outputs,
                    const std::vector<std::string>& references, const EvalConfig& config) {
    if (outputs.size() != references.size()) {
        throw InputMismatch("evaluate: " + std::to_string(outputs.size()) + " outputs vs " +
                            std::to_string(references.size()) + " references");
    }
    if (outputs.empty()) {
        throw EmptyCorpus("evaluate: no outputs");
    }
    EvalReport report;
    report.system = config.system_name;
    {
        std::string bytes;
        for (const auto& reference : references) {
            bytes += reference;
            bytes += '\n';
        }
        report.corpus_fingerprint = sha256_hex(bytes);
    }
    report.segment_count = outputs.size();

    BleuConfig bleu_cfg = config.bleu;
    if (config.target_lang.code == "kor_Hang" &&
        bleu_cfg.tokenizer == BleuTokenizer::Thirteen_a) {
        bleu_cfg.tokenizer = BleuTokenizer::Whitespace;
        report.notes.push_back(
            "BLEU fell back to whitespace tokenization: Korean morphological "
            "tokenization requires an external analyzer");
    }

    std::vector<std::string> texts;
    texts.reserve(outputs.size());
    for (const auto& output : outputs) {
        texts.push_back(output.text);
    }
    report.bleu = corpus_bleu(texts, references, bleu_cfg);
    report.chrf = corpus_chrf_pp(texts, references, config.chrf);

    BleuConfig sentence_cfg = bleu_cfg;
    sentence_cfg.smoothing = BleuSmoothing::FloorEpsilon;
    report.segment_bleu.reserve(outputs.size());
    report.segment_chrf.reserve(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        report.segment_bleu.push_back(sentence_bleu(texts[i], references[i], sentence_cfg));
        report.segment_chrf.push_back(sentence_chrf_pp(texts[i], references[i], config.chrf));
    }

    if (config.qe != nullptr) {
        // Reference-based mode: the scorer sees the reference in its
        // source slot.
        const std::vector<double> scores = config.qe->score_batch(references, texts);
        if (scores.size() != texts.size()) {
            throw ProtocolError("QE returned " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(texts.size()) + " outputs");
        }
        report.qe = std::accumulate(scores.begin(), scores.end(), 0.0) /
                    static_cast<double>(scores.size());
    }
    return report;
}

std::vector<std::string> align_references(const std::vector<SourceSegment>& corpus,
                                          const std::vector<std::string>& references,
                                          const std::vector<EnsembleOutput>& outputs) {
    if (corpus.size() != references.size()) {
        throw InputMismatch("align_references: " + std::to_string(corpus.size()) +
                            " segments vs " + std::to_string(references.size()) +
                            " references");
    }
    std::map<std::string, std::size_t> index_by_id;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        index_by_id[corpus[i].id] = i;
    }
    std::vector<std::string> aligned;
    aligned.reserve(outputs.size());
    for (const auto& output : outputs) {
        const auto it = index_by_id.find(output.segment_id);
        if (it == index_by_id.end()) {
            throw InputMismatch("output references segment " + output.segment_id +
                                " which is not in the corpus");
        }
        aligned.push_back(references[it->second]);
    }
    return aligned;
}

void save_segment_scores(const std::filesystem::path& path,
                         const std::vector<EnsembleOutput>& outputs, const EvalReport& report) {
    if (outputs.size() != report.segment_bleu.size() ||
        outputs.size() != report.segment_chrf.size()) {
        throw InputMismatch("segment score dump: outputs and report disagree on length");
    }
    std::vector<std::string> lines;
    lines.reserve(outputs.size() + 1);
    lines.push_back("segment_id\tbleu\tchrf");
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        lines.push_back(outputs[i].segment_id + "\t" +
                        canonical_json(json(report.segment_bleu[i])) + "\t" +
                        canonical_json(json(report.segment_chrf[i])));
    }
    write_lines(path, lines);
}

std::string format_score(double value) {
    // Half-up to 2 decimals, display only; metric values are kept at full
    // precision everywhere else.
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.2f", std::floor(value * 100.0 + 0.5) / 100.0);
    return buffer;
}

ComparisonTable compare_systems(const std::vector<EvalReport>& reports) {
    if (reports.empty()) {
        throw ConfigError("compare_systems: no reports");
    }
    for (const auto& report : reports) {
        if (report.corpus_fingerprint != reports.front().corpus_fingerprint) {
            throw CorpusMismatch("system " + report.system +
                                 " was evaluated on a different corpus than " +
                                 reports.front().system);
        }
    }
    return ComparisonTable{reports};
}

namespace {

// Flags per system per metric column: true when that system attains the
// column's maximum (ties flag every maximizer).
struct ColumnFlags {
    std::vector<bool> bleu;
    std::vector<bool> chrf;
    std::vector<bool> qe;
};

ColumnFlags best_flags(const std::vector<EvalReport>& systems) {
    ColumnFlags flags;
    flags.bleu.resize(systems.size(), false);
    flags.chrf.resize(systems.size(), false);
    flags.qe.resize(systems.size(), false);
    double best_bleu = -1.0;
    double best_chrf = -1.0;
    double best_qe = 0.0;
    bool any_qe = false;
    for (const auto& system : systems) {
        best_bleu = std::max(best_bleu, system.bleu);
        best_chrf = std::max(best_chrf, system.chrf);
        if (system.qe.has_value() && (!any_qe || *system.qe > best_qe)) {
            best_qe = *system.qe;
            any_qe = true;
        }
    }
    for (std::size_t i = 0; i < systems.size(); ++i) {
        flags.bleu[i] = systems[i].bleu == best_bleu;
        flags.chrf[i] = systems[i].chrf == best_chrf;
        flags.qe[i] = any_qe && systems[i].qe.has_value() && *systems[i].qe == best_qe;
    }
    return flags;
}

}  // namespace

std::string ComparisonTable::to_markdown() const {
    const ColumnFlags flags = best_flags(systems);
    std::string out = "| Model | BLEU | chrF++ | COMET |\n| --- | --- | --- | --- |\n";
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const auto cell = [&](double value, bool best) {
            const std::string text = format_score(value);
            return best ? "**" + text + "**" : text;
        };
        out += "| " + systems[i].system + " | " + cell(systems[i].bleu, flags.bleu[i]) +
               " | " + cell(systems[i].chrf, flags.chrf[i]) + " | ";
        out += systems[i].qe.has_value() ? cell(*systems[i].qe, flags.qe[i])
                                         : std::string("n/a");
        out += " |\n";
    }
    return out;
}

std::string ComparisonTable::to_tsv() const {
    const ColumnFlags flags = best_flags(systems);
    std::string out = "Model\tBLEU\tchrF++\tCOMET\n";
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const auto cell = [&](double value, bool best) {
            return format_score(value) + (best ? "*" : "");
        };
        out += systems[i].system + "\t" + cell(systems[i].bleu, flags.bleu[i]) + "\t" +
               cell(systems[i].chrf, flags.chrf[i]) + "\t";
        out += systems[i].qe.has_value() ? cell(*systems[i].qe, flags.qe[i])
                                         : std::string("n/a");
        out += "\n";
    }
    return out;
}

}  // namespace pivotmt
