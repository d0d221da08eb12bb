#include "pivotmt/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace pivotmt {

namespace {

struct RegistryEntry {
    std::string_view code;
    std::string_view name;
};

// Display names for the language codes appearing in the bundled
// path-score tables, plus the working pairs. Unknown codes fall back to
// the code string; prompts stay renderable either way.
constexpr std::array<RegistryEntry, 29> kRegistry{{
    {"arb_Arab", "Arabic"},     {"ben_Beng", "Bengali"},    {"ces_Latn", "Czech"},
    {"deu_Latn", "German"},     {"ell_Grek", "Greek"},      {"eng_Latn", "English"},
    {"fin_Latn", "Finnish"},    {"fra_Latn", "French"},     {"heb_Hebr", "Hebrew"},
    {"hin_Deva", "Hindi"},      {"hun_Latn", "Hungarian"},  {"ind_Latn", "Indonesian"},
    {"ita_Latn", "Italian"},    {"jpn_Jpan", "Japanese"},   {"kor_Hang", "Korean"},
    {"lit_Latn", "Lithuanian"}, {"nld_Latn", "Dutch"},      {"pes_Arab", "Persian"},
    {"pol_Latn", "Polish"},     {"por_Latn", "Portuguese"}, {"rus_Cyrl", "Russian"},
    {"spa_Latn", "Spanish"},    {"swe_Latn", "Swedish"},    {"swh_Latn", "Swahili"},
    {"tam_Taml", "Tamil"},      {"tur_Latn", "Turkish"},    {"ukr_Cyrl", "Ukrainian"},
    {"vie_Latn", "Vietnamese"}, {"zho_Hans", "Chinese"},
}};

bool all_letters(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalpha(c) != 0;
    });
}

}  // namespace

bool is_valid_language_code(std::string_view code) {
    const auto underscore = code.find('_');
    if (underscore == std::string_view::npos) return false;
    return all_letters(code.substr(0, underscore)) && all_letters(code.substr(underscore + 1));
}

std::optional<std::string> display_name_for(std::string_view code) {
    for (const auto& entry : kRegistry) {
        if (entry.code == code) return std::string(entry.name);
    }
    return std::nullopt;
}

LanguageCode::LanguageCode(std::string code_) : code(std::move(code_)) {
    if (!is_valid_language_code(code)) {
        throw ConfigError("invalid language code: '" + code + "'");
    }
    display_name = display_name_for(code).value_or(code);
}

LanguageCode::LanguageCode(std::string code_, std::string display_name_)
    : code(std::move(code_)), display_name(std::move(display_name_)) {
    if (!is_valid_language_code(code)) {
        throw ConfigError("invalid language code: '" + code + "'");
    }
    if (display_name.empty()) display_name = display_name_for(code).value_or(code);
}

TranslationPath TranslationPath::direct(LanguageCode source, LanguageCode target) {
    if (source == target) {
        throw ConfigError("direct path requires distinct languages, got '" + source.code + "'");
    }
    TranslationPath path;
    path.kind = PathKind::Direct;
    path.source_lang = std::move(source);
    path.target_lang = std::move(target);
    return path;
}

TranslationPath TranslationPath::via(LanguageCode pivot, LanguageCode source,
                                     LanguageCode target) {
    if (source == target) {
        throw ConfigError("pivot path requires distinct languages, got '" + source.code + "'");
    }
    if (pivot == source || pivot == target) {
        throw ConfigError("pivot '" + pivot.code + "' must differ from both endpoint languages");
    }
    TranslationPath path;
    path.kind = PathKind::Pivot;
    path.pivot = std::move(pivot);
    path.source_lang = std::move(source);
    path.target_lang = std::move(target);
    return path;
}

std::string TranslationPath::code() const {
    return is_direct() ? "direct" : pivot->code;
}

bool TranslationPath::operator==(const TranslationPath& other) const {
    if (kind != other.kind) return false;
    if (source_lang != other.source_lang || target_lang != other.target_lang) return false;
    if (kind == PathKind::Pivot) return *pivot == *other.pivot;
    return true;
}

TranslationPath path_from_code(const std::string& code, const LanguageCode& source,
                               const LanguageCode& target) {
    if (code == "direct") return TranslationPath::direct(source, target);
    return TranslationPath::via(LanguageCode(code), source, target);
}

std::string strategy_name(MergeStrategy strategy) {
    switch (strategy) {
        case MergeStrategy::LlmFusion: return "llm_fusion";
        case MergeStrategy::SelectionTop1: return "selection_top1";
        case MergeStrategy::Mbr: return "mbr";
        case MergeStrategy::FixedPaths: return "fixed_paths";
    }
    throw ConfigError("unknown merge strategy value");
}

MergeStrategy strategy_from_name(const std::string& name) {
    if (name == "llm_fusion") return MergeStrategy::LlmFusion;
    if (name == "selection_top1") return MergeStrategy::SelectionTop1;
    if (name == "mbr") return MergeStrategy::Mbr;
    if (name == "fixed_paths") return MergeStrategy::FixedPaths;
    throw ConfigError("unknown merge strategy: '" + name + "'");
}

PoolValidation validate_pool(const CandidatePool& pool) {
    PoolValidation result;
    auto flag = [&result](std::string message) { result.violations.push_back(std::move(message)); };

    if (pool.candidates.empty()) flag("empty pool: at least one candidate required");
    if (pool.path_order.empty()) flag("empty path order");
    if (pool.candidates.size() > pool.path_order.size()) {
        flag("more candidates (" + std::to_string(pool.candidates.size()) +
             ") than configured paths (" + std::to_string(pool.path_order.size()) + ")");
    }

    // Duplicate paths among candidates.
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.candidates.size(); ++j) {
            if (pool.candidates[i].path == pool.candidates[j].path) {
                flag("duplicate path: " + pool.candidates[i].path.code());
            }
        }
    }

    // Candidate order must follow path_order: positions of candidate
    // paths within path_order are strictly increasing.
    std::size_t last_pos = 0;
    bool order_ok = true;
    bool first = true;
    for (const auto& candidate : pool.candidates) {
        auto it = std::find(pool.path_order.begin(), pool.path_order.end(), candidate.path);
        if (it == pool.path_order.end()) {
            flag("candidate path not in path order: " + candidate.path.code());
            order_ok = false;
            continue;
        }
        const auto pos = static_cast<std::size_t>(it - pool.path_order.begin());
        if (!first && order_ok && pos <= last_pos) {
            flag("candidate order deviates from path order at: " + candidate.path.code());
        }
        last_pos = pos;
        first = false;
    }

    for (const auto& candidate : pool.candidates) {
        const bool is_pivot = candidate.path.kind == PathKind::Pivot;
        if (is_pivot && !candidate.intermediate.has_value()) {
            flag("missing intermediate for pivot path: " + candidate.path.code());
        }
        if (!is_pivot && candidate.intermediate.has_value()) {
            flag("unexpected intermediate on direct path");
        }
        if (candidate.segment_id != pool.segment_id) {
            flag("segment id mismatch: candidate '" + candidate.segment_id + "' vs pool '" +
                 pool.segment_id + "'");
        }
    }

    return result;
}

void to_json(nlohmann::json& j, const LanguageCode& lang) {
    j = nlohmann::json{{"code", lang.code}, {"display_name", lang.display_name}};
}

void from_json(const nlohmann::json& j, LanguageCode& lang) {
    lang = LanguageCode(j.at("code").get<std::string>(),
                        j.value("display_name", std::string{}));
}

void to_json(nlohmann::json& j, const TranslationPath& path) {
    j = nlohmann::json{{"kind", path.is_direct() ? "direct" : "pivot"},
                       {"source_lang", path.source_lang},
                       {"target_lang", path.target_lang}};
    if (path.pivot) j["pivot"] = *path.pivot;
}

void from_json(const nlohmann::json& j, TranslationPath& path) {
    const auto kind = j.at("kind").get<std::string>();
    const auto source = j.at("source_lang").get<LanguageCode>();
    const auto target = j.at("target_lang").get<LanguageCode>();
    if (kind == "direct") {
        path = TranslationPath::direct(source, target);
    } else if (kind == "pivot") {
        path = TranslationPath::via(j.at("pivot").get<LanguageCode>(), source, target);
    } else {
        throw ConfigError("unknown path kind: '" + kind + "'");
    }
}

void to_json(nlohmann::json& j, const SourceSegment& segment) {
    j = nlohmann::json{{"id", segment.id}, {"text", segment.text}, {"lang", segment.lang}};
}

void from_json(const nlohmann::json& j, SourceSegment& segment) {
    segment.id = j.at("id").get<std::string>();
    segment.text = j.at("text").get<std::string>();
    segment.lang = j.at("lang").get<LanguageCode>();
}

void to_json(nlohmann::json& j, const Candidate& candidate) {
    j = nlohmann::json{{"text", candidate.text},
                       {"path", candidate.path},
                       {"segment_id", candidate.segment_id}};
    if (candidate.intermediate) j["intermediate"] = *candidate.intermediate;
}

void from_json(const nlohmann::json& j, Candidate& candidate) {
    candidate.text = j.at("text").get<std::string>();
    candidate.path = j.at("path").get<TranslationPath>();
    candidate.segment_id = j.at("segment_id").get<std::string>();
    if (j.contains("intermediate")) {
        candidate.intermediate = j.at("intermediate").get<std::string>();
    } else {
        candidate.intermediate.reset();
    }
}

void to_json(nlohmann::json& j, const CandidatePool& pool) {
    j = nlohmann::json{{"segment_id", pool.segment_id},
                       {"candidates", pool.candidates},
                       {"path_order", pool.path_order}};
}

void from_json(const nlohmann::json& j, CandidatePool& pool) {
    pool.segment_id = j.at("segment_id").get<std::string>();
    pool.candidates = j.at("candidates").get<std::vector<Candidate>>();
    pool.path_order = j.at("path_order").get<std::vector<TranslationPath>>();
}

void to_json(nlohmann::json& j, const ScoredCandidate& scored) {
    j = nlohmann::json{{"candidate", scored.candidate}, {"score", scored.score}};
}

void from_json(const nlohmann::json& j, ScoredCandidate& scored) {
    scored.candidate = j.at("candidate").get<Candidate>();
    scored.score = j.at("score").get<double>();
}

void to_json(nlohmann::json& j, const EnsembleOutput& output) {
    j = nlohmann::json{{"segment_id", output.segment_id},
                       {"text", output.text},
                       {"strategy", strategy_name(output.strategy)},
                       {"inputs_used", output.inputs_used},
                       {"k", output.k}};
}

void from_json(const nlohmann::json& j, EnsembleOutput& output) {
    output.segment_id = j.at("segment_id").get<std::string>();
    output.text = j.at("text").get<std::string>();
    output.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    output.inputs_used = j.at("inputs_used").get<std::vector<std::string>>();
    output.k = j.at("k").get<int>();
}

}  // namespace pivotmt
