// Command-line driver: every pipeline stage as its own subcommand plus the
// monolithic run. Exit codes: 0 ok, 1 run failure, 2 configuration or usage
// error, 3 backend unavailable or protocol breach, 4 data mismatch.
#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pivotmt/harness.hpp"
#include "pivotmt/path_selection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pivotmt;

namespace {

// Maps the library's error taxonomy onto the documented exit codes.
int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const BackendUnavailable& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const QeUnavailable& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const InputMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const CorpusMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const EmptyCorpus& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const StorageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

std::vector<SourceSegment> load_corpus(const fs::path& path) {
    return read_jsonl<SourceSegment>(path);
}

// --- select-paths ------------------------------------------------------------

struct SelectPathsArgs {
    std::string src;
    std::string tgt;
    std::vector<std::string> pivots;
    std::size_t n = 0;
    std::string metric = "bleu";
    std::string from_table;
    std::string corpus;
    std::string refs;
    std::string backend = "mock:";
    std::string qe_backend;
    std::string cache;
    std::size_t parallelism = 1;
    bool force_include_direct = false;
    std::string out_table;
    std::string out_paths;
    bool dry_run = false;
};

json resolved_select_config(const SelectPathsArgs& args) {
    json j{{"src", args.src},
           {"tgt", args.tgt},
           {"pivots", args.pivots},
           {"n", args.n},
           {"metric", args.metric},
           {"backend", args.backend},
           {"parallelism", args.parallelism},
           {"force_include_direct", args.force_include_direct}};
    if (!args.from_table.empty()) {
        j["from_table"] = args.from_table;
    }
    if (!args.corpus.empty()) {
        j["corpus"] = args.corpus;
    }
    if (!args.refs.empty()) {
        j["refs"] = args.refs;
    }
    if (!args.qe_backend.empty()) {
        j["qe_backend"] = args.qe_backend;
    }
    if (!args.cache.empty()) {
        j["cache"] = args.cache;
    }
    return j;
}

int run_select_paths(const SelectPathsArgs& args) {
    if (args.dry_run) {
        std::cout << canonical_json(resolved_select_config(args)) << "\n";
        return 0;
    }
    const LanguageCode source(args.src);
    const LanguageCode target(args.tgt);

    PathScoreTable table;
    if (!args.from_table.empty()) {
        // Replay mode: selection only, no translation.
        table = load_path_table(args.from_table);
        if (table.source_lang != source || table.target_lang != target) {
            throw ConfigError("table " + args.from_table + " is for " +
                              table.source_lang.code + "->" + table.target_lang.code +
                              ", flags ask for " + source.code + "->" + target.code);
        }
    } else {
        if (args.pivots.empty()) {
            throw ConfigError("--pivots is required unless --from-table is given");
        }
        if (args.corpus.empty() || args.refs.empty()) {
            throw ConfigError("--corpus and --refs are required unless --from-table is given");
        }
        const auto corpus = load_corpus(args.corpus);
        const auto references = read_lines(args.refs);
        std::vector<LanguageCode> pivot_pool;
        pivot_pool.reserve(args.pivots.size());
        for (const auto& code : args.pivots) {
            pivot_pool.emplace_back(code);
        }
        BackendConfig backend_cfg = MockBackend::default_config();
        backend_cfg.endpoint = args.backend;
        const auto backend = make_backend(backend_cfg);
        const SelectionMetric metric = selection_metric_from_name(args.metric);
        std::unique_ptr<QeScorer> qe;
        if (metric == SelectionMetric::QeScore) {
            if (args.qe_backend.empty()) {
                qe = std::make_unique<LexicalProxyQe>();
            } else {
                BackendConfig qe_cfg = MockBackend::default_config();
                qe_cfg.endpoint = args.qe_backend;
                qe = std::make_unique<ExternalQe>(qe_cfg);
            }
        }
        std::unique_ptr<Cache> cache;
        if (!args.cache.empty()) {
            cache = std::make_unique<Cache>(args.cache);
        }
        table = score_paths(corpus, references, pivot_pool, target, *backend, metric,
                            qe.get(), cache.get(), args.parallelism);
        if (!args.out_table.empty()) {
            save_path_table(table, args.out_table);
        }
    }

    const std::vector<TranslationPath> chosen =
        select_top_paths(table, args.n, args.force_include_direct);
    json out{{"source", source.code}, {"target", target.code}};
    json codes = json::array();
    for (const auto& path : chosen) {
        codes.push_back(path.code());
    }
    out["paths"] = codes;
    const std::string text = canonical_json(out) + "\n";
    if (!args.out_paths.empty()) {
        atomic_write_file(args.out_paths, text);
    }
    std::cout << text;
    return 0;
}

// --- config-consuming commands -------------------------------------------------

struct ConfigOverrides {
    std::string strategy;
    std::vector<std::string> fixed_paths;
    std::size_t k = 0;           // 0 = keep config value
    std::size_t parallelism = 0; // 0 = keep config value
};

void apply_overrides(PipelineConfig& config, const ConfigOverrides& overrides) {
    if (!overrides.strategy.empty()) {
        config.merger.strategy = strategy_from_name(overrides.strategy);
        if (config.merger.strategy != MergeStrategy::FixedPaths) {
            config.merger.fixed_path_codes.clear();
        }
    }
    if (!overrides.fixed_paths.empty()) {
        config.merger.strategy = MergeStrategy::FixedPaths;
        config.merger.fixed_path_codes = overrides.fixed_paths;
    }
    if (overrides.k != 0) {
        config.k = overrides.k;
    }
    if (overrides.parallelism != 0) {
        config.parallelism = overrides.parallelism;
    }
    config.validate();
}

// Shared by `pipeline` and `evaluate` so both write identical artifacts.
int run_evaluation(const PipelineConfig& config, const RunLayout& layout,
                   const std::vector<SourceSegment>& corpus,
                   const std::vector<EnsembleOutput>& outputs, const fs::path& refs_path,
                   const std::string& system_name, const std::string& report_tsv) {
    const auto references = read_lines(refs_path);
    const auto aligned = align_references(corpus, references, outputs);

    EvalConfig eval_cfg;
    eval_cfg.system_name = system_name;
    eval_cfg.target_lang = config.target_lang;
    std::unique_ptr<QeScorer> column_scorer;
    if (config.qe.kind == QeSpec::Kind::External) {
        column_scorer = std::make_unique<ExternalQe>(config.qe.backend);
        eval_cfg.qe = column_scorer.get();
    }
    const EvalReport report = evaluate(outputs, aligned, eval_cfg);

    atomic_write_file(layout.eval_report(), canonical_json(json(report)) + "\n");
    save_segment_scores(layout.segment_scores(), outputs, report);
    const ComparisonTable table = compare_systems({report});
    std::cout << table.to_markdown();
    for (const auto& note : report.notes) {
        std::cerr << "note: " << note << "\n";
    }
    if (!report_tsv.empty()) {
        atomic_write_file(report_tsv, table.to_tsv());
    }
    return 0;
}

struct PipelineArgs {
    std::string config_path;
    std::string resume_manifest;
    std::string corpus;
    std::string refs;
    std::string out;
    std::string system = "pipeline";
    std::string report_tsv;
    ConfigOverrides overrides;
    bool dry_run = false;
};

int run_pipeline_cmd(const PipelineArgs& args) {
    PipelineConfig config;
    if (!args.resume_manifest.empty()) {
        const RunManifest manifest = load_manifest(args.resume_manifest);
        config = manifest.config.get<PipelineConfig>();
    } else if (!args.config_path.empty()) {
        config = load_pipeline_config(args.config_path);
    } else {
        throw ConfigError("pipeline needs --config or --resume");
    }
    apply_overrides(config, args.overrides);
    if (args.dry_run) {
        std::cout << canonical_json(json(config)) << "\n";
        return 0;
    }
    const auto corpus = load_corpus(args.corpus);
    if (!args.resume_manifest.empty()) {
        const RunManifest manifest = load_manifest(args.resume_manifest);
        const auto it = manifest.corpus_fingerprints.find("corpus");
        if (it == manifest.corpus_fingerprints.end() ||
            it->second != corpus_fingerprint(corpus)) {
            throw CorpusMismatch("corpus does not match the manifest's fingerprint");
        }
    }
    const PipelineResult result = run_pipeline(corpus, config, args.out);
    for (const auto& failure : result.failures) {
        std::cerr << "warning: segment " << failure.segment_id << " failed during "
                  << failure.stage << ": " << failure.reason << "\n";
    }
    if (!args.refs.empty()) {
        return run_evaluation(config, RunLayout{fs::path(args.out)}, corpus, result.outputs,
                              args.refs, args.system, args.report_tsv);
    }
    return 0;
}

struct StageArgs {
    std::string config_path;
    std::string corpus;  // generate only
    std::string dir;
    std::string refs;                 // evaluate only
    std::string system = "pipeline";  // evaluate only
    std::string report_tsv;           // evaluate only
    ConfigOverrides overrides;
    bool dry_run = false;
};

PipelineConfig stage_config(const StageArgs& args) {
    PipelineConfig config = load_pipeline_config(args.config_path);
    apply_overrides(config, args.overrides);
    return config;
}

int run_generate_cmd(const StageArgs& args) {
    const PipelineConfig config = stage_config(args);
    if (args.dry_run) {
        std::cout << canonical_json(json(config)) << "\n";
        return 0;
    }
    const auto corpus = load_corpus(args.corpus);
    stage_generate(corpus, config, RunLayout{fs::path(args.dir)});
    return 0;
}

int run_rank_cmd(const StageArgs& args) {
    const PipelineConfig config = stage_config(args);
    if (args.dry_run) {
        std::cout << canonical_json(json(config)) << "\n";
        return 0;
    }
    const RunLayout layout{fs::path(args.dir)};
    const auto corpus = read_jsonl<SourceSegment>(layout.segments());
    const auto pools = read_jsonl<CandidatePool>(layout.pools());
    stage_rank(corpus, pools, config, layout);
    return 0;
}

int run_merge_cmd(const StageArgs& args) {
    const PipelineConfig config = stage_config(args);
    if (args.dry_run) {
        std::cout << canonical_json(json(config)) << "\n";
        return 0;
    }
    const RunLayout layout{fs::path(args.dir)};
    const auto corpus = read_jsonl<SourceSegment>(layout.segments());
    const auto pools = read_jsonl<CandidatePool>(layout.pools());
    const auto scored = read_jsonl<ScoredPool>(layout.scored());
    GenerationReport report;
    try {
        report = json::parse(read_file(layout.generation_report())).get<GenerationReport>();
    } catch (const json::exception& e) {
        throw ParseError("bad generation report " + layout.generation_report().string() +
                         ": " + e.what());
    }
    const PipelineResult result = stage_merge(corpus, pools, scored, report, config, layout);
    for (const auto& failure : result.failures) {
        std::cerr << "warning: segment " << failure.segment_id << " failed during "
                  << failure.stage << ": " << failure.reason << "\n";
    }
    return 0;
}

int run_evaluate_cmd(const StageArgs& args) {
    const PipelineConfig config = stage_config(args);
    if (args.dry_run) {
        std::cout << canonical_json(json(config)) << "\n";
        return 0;
    }
    const RunLayout layout{fs::path(args.dir)};
    const auto corpus = read_jsonl<SourceSegment>(layout.segments());
    const auto outputs = read_jsonl<EnsembleOutput>(layout.outputs());
    return run_evaluation(config, layout, corpus, outputs, args.refs, args.system,
                          args.report_tsv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pivot-ensemble translation pipeline"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    SelectPathsArgs select_args;
    CLI::App* select = app.add_subcommand(
        "select-paths", "Score candidate pivot paths on a benchmark and pick the top n");
    select->add_option("--src", select_args.src, "Source language code")->required();
    select->add_option("--tgt", select_args.tgt, "Target language code")->required();
    select->add_option("--pivots", select_args.pivots, "Comma-separated pivot language codes")
        ->delimiter(',');
    select->add_option("--n", select_args.n, "How many paths to select")->required();
    select->add_option("--metric", select_args.metric, "Path metric: bleu or qe_score");
    select->add_option("--from-table", select_args.from_table,
                       "Select from an existing score table instead of translating");
    select->add_option("--corpus", select_args.corpus, "Benchmark corpus (JSONL segments)");
    select->add_option("--refs", select_args.refs, "Reference translations (one per line)");
    select->add_option("--backend", select_args.backend, "Translation backend endpoint");
    select->add_option("--qe-backend", select_args.qe_backend,
                       "QE service endpoint (qe_score metric)");
    select->add_option("--cache", select_args.cache, "Translation cache directory");
    select->add_option("--parallelism", select_args.parallelism, "Concurrent path workers");
    select->add_flag("--force-include-direct", select_args.force_include_direct,
                     "Always keep the direct path in the selection");
    select->add_option("--out-table", select_args.out_table, "Where to write the score table");
    select->add_option("--out-paths", select_args.out_paths,
                       "Where to write the chosen path list (JSON)");
    select->add_flag("--dry-run", select_args.dry_run,
                     "Print the resolved configuration and exit");

    PipelineArgs pipeline_args;
    CLI::App* pipeline =
        app.add_subcommand("pipeline", "Run generation, ranking, merging and evaluation");
    auto* pipeline_config =
        pipeline->add_option("--config", pipeline_args.config_path, "Pipeline config JSON");
    pipeline->add_option("--resume", pipeline_args.resume_manifest,
                         "Rerun the configuration embedded in a manifest")
        ->excludes(pipeline_config);
    pipeline->add_option("--corpus", pipeline_args.corpus, "Corpus (JSONL segments)")
        ->required();
    pipeline->add_option("--refs", pipeline_args.refs,
                         "References; enables evaluation and the report table");
    pipeline->add_option("--out", pipeline_args.out, "Run directory for all artifacts")
        ->required();
    pipeline->add_option("--system", pipeline_args.system, "System name in the report");
    pipeline->add_option("--report-tsv", pipeline_args.report_tsv,
                         "Also write the report table as TSV");
    pipeline->add_option("--strategy", pipeline_args.overrides.strategy,
                         "Override the merge strategy");
    pipeline
        ->add_option("--fixed-paths", pipeline_args.overrides.fixed_paths,
                     "Override the fixed-path list (implies --strategy fixed_paths)")
        ->delimiter(',');
    pipeline->add_option("--k", pipeline_args.overrides.k, "Override top-k");
    pipeline->add_option("--parallelism", pipeline_args.overrides.parallelism,
                         "Override worker count");
    pipeline->add_flag("--dry-run", pipeline_args.dry_run,
                       "Print the resolved configuration and exit");

    StageArgs generate_args;
    CLI::App* generate =
        app.add_subcommand("generate", "Candidate generation stage: corpus -> pools");
    generate->add_option("--config", generate_args.config_path, "Pipeline config JSON")
        ->required();
    generate->add_option("--corpus", generate_args.corpus, "Corpus (JSONL segments)")
        ->required();
    generate->add_option("--dir", generate_args.dir, "Run directory")->required();
    generate->add_option("--parallelism", generate_args.overrides.parallelism,
                         "Override worker count");
    generate->add_flag("--dry-run", generate_args.dry_run,
                       "Print the resolved configuration and exit");

    StageArgs rank_args;
    CLI::App* rank = app.add_subcommand("rank", "QE ranking stage: pools -> scored pools");
    rank->add_option("--config", rank_args.config_path, "Pipeline config JSON")->required();
    rank->add_option("--dir", rank_args.dir, "Run directory")->required();
    rank->add_option("--k", rank_args.overrides.k, "Override top-k");
    rank->add_flag("--dry-run", rank_args.dry_run,
                   "Print the resolved configuration and exit");

    StageArgs merge_args;
    CLI::App* merge =
        app.add_subcommand("merge", "Merging stage: scored pools -> ensemble outputs");
    merge->add_option("--config", merge_args.config_path, "Pipeline config JSON")->required();
    merge->add_option("--dir", merge_args.dir, "Run directory")->required();
    merge->add_option("--strategy", merge_args.overrides.strategy,
                      "Override the merge strategy");
    merge
        ->add_option("--fixed-paths", merge_args.overrides.fixed_paths,
                     "Override the fixed-path list (implies --strategy fixed_paths)")
        ->delimiter(',');
    merge->add_flag("--dry-run", merge_args.dry_run,
                    "Print the resolved configuration and exit");

    StageArgs evaluate_args;
    CLI::App* evaluate_cmd =
        app.add_subcommand("evaluate", "Score outputs against references and print the table");
    evaluate_cmd->add_option("--config", evaluate_args.config_path, "Pipeline config JSON")
        ->required();
    evaluate_cmd->add_option("--dir", evaluate_args.dir, "Run directory")->required();
    evaluate_cmd->add_option("--refs", evaluate_args.refs, "References (one per line)")
        ->required();
    evaluate_cmd->add_option("--system", evaluate_args.system, "System name in the report");
    evaluate_cmd->add_option("--report-tsv", evaluate_args.report_tsv,
                             "Also write the report table as TSV");
    evaluate_cmd->add_flag("--dry-run", evaluate_args.dry_run,
                           "Print the resolved configuration and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    return guarded([&]() -> int {
        if (app.got_subcommand(select)) {
            return run_select_paths(select_args);
        }
        if (app.got_subcommand(pipeline)) {
            return run_pipeline_cmd(pipeline_args);
        }
        if (app.got_subcommand(generate)) {
            return run_generate_cmd(generate_args);
        }
        if (app.got_subcommand(rank)) {
            return run_rank_cmd(rank_args);
        }
        if (app.got_subcommand(merge)) {
            return run_merge_cmd(merge_args);
        }
        if (app.got_subcommand(evaluate_cmd)) {
            return run_evaluate_cmd(evaluate_args);
        }
        throw ConfigError("no subcommand given");
    });
}
