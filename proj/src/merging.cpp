#include "pivotmt/merging.hpp"

#include <algorithm>

#include "pivotmt/errors.hpp"
#include "pivotmt/metrics.hpp"

namespace pivotmt {

namespace {

void require_no_newline(const std::string& text, const std::string& what) {
    if (text.find('\n') != std::string::npos) {
        throw RenderError(what + " contains an embedded newline");
    }
}

void validate_prompt_spec(const PromptSpec& spec) {
    if (spec.source_text.empty()) {
        throw RenderError("prompt source text is empty");
    }
    if (spec.source_lang_name.empty() || spec.target_lang_name.empty()) {
        throw RenderError("prompt language names must be non-empty");
    }
    require_no_newline(spec.source_text, "source text");
    if (spec.template_id == PromptTemplate::ZeroShotTranslate) {
        if (!spec.candidates.empty()) {
            throw RenderError("zero-shot template takes no candidates");
        }
        return;
    }
    if (spec.candidates.empty()) {
        throw RenderError("ensemble templates require at least one candidate");
    }
    for (std::size_t i = 0; i < spec.candidates.size(); ++i) {
        if (spec.candidates[i].empty()) {
            throw RenderError("candidate " + std::to_string(i + 1) + " is empty");
        }
        require_no_newline(spec.candidates[i], "candidate " + std::to_string(i + 1));
    }
}

}  // namespace

std::string render_prompt(const PromptSpec& spec) {
    validate_prompt_spec(spec);
    const std::string& src = spec.source_lang_name;
    const std::string& tgt = spec.target_lang_name;

    switch (spec.template_id) {
        case PromptTemplate::ZeroShotTranslate:
            return "Translate this sentence from " + src + " to " + tgt +
                   ", Source: " + spec.source_text + "\nTarget:";
        case PromptTemplate::EnsembleFuse: {
            std::string out = "Ensemble the " + src + " sentence with the provided " + tgt +
                              " candidates to create the best possible " + tgt +
                              " translation.\n";
            out += src + " sentence: " + spec.source_text + "\n";
            for (std::size_t i = 0; i < spec.candidates.size(); ++i) {
                out += tgt + " candidate " + std::to_string(i + 1) + ": " +
                       spec.candidates[i] + "\n";
            }
            out += "Please provide only the " + tgt + " translation and no additional text.\n";
            out += tgt + " translation:";
            return out;
        }
        case PromptTemplate::GenFuserConcat: {
            std::string out = "Fuse the candidate " + tgt + " translations of the " + src +
                              " sentence into one best translation.\n";
            out += src + " sentence: " + spec.source_text + "\n";
            for (const auto& candidate : spec.candidates) {
                out += candidate + "\n";
            }
            out += tgt + " translation:";
            return out;
        }
    }
    throw RenderError("unknown prompt template");
}

namespace {

constexpr const char* kTriceSeparator = "</s>";

void require_trice_text(const std::string& text, const std::string& what) {
    if (text.empty()) {
        throw ConfigError("trice " + what + " is empty");
    }
    if (text.find(kTriceSeparator) != std::string::npos) {
        throw ConfigError("trice " + what + " contains the reserved \"</s>\" separator");
    }
}

std::string trice_unit(const std::string& text, const std::string& token) {
    return text + kTriceSeparator + "<" + token + ">";
}

}  // namespace

std::string serialize_trice(const TriceInput& input) {
    require_trice_text(input.source_text, "source text");
    require_trice_text(input.source_lang_token, "source language token");
    require_trice_text(input.target_lang_token, "target language token");
    if (input.candidates.empty()) {
        throw ConfigError("trice input requires at least one candidate");
    }
    std::string out = trice_unit(input.source_text, input.source_lang_token);
    for (std::size_t i = 0; i < input.candidates.size(); ++i) {
        require_trice_text(input.candidates[i], "candidate " + std::to_string(i + 1));
        out += ";" + trice_unit(input.candidates[i], input.target_lang_token);
    }
    return out;
}

TriceInput parse_trice(const std::string& serialized) {
    // "</s>" cannot occur inside unit texts (the serializer rejects it), so
    // each occurrence is a hard unit boundary even when texts contain ";".
    std::vector<std::pair<std::string, std::string>> units;  // (text, token)
    std::size_t pos = 0;
    while (pos < serialized.size()) {
        const std::size_t sep = serialized.find(kTriceSeparator, pos);
        if (sep == std::string::npos) {
            throw ParseError("trice sequence: missing \"</s>\" separator");
        }
        const std::string text = serialized.substr(pos, sep - pos);
        pos = sep + std::string(kTriceSeparator).size();
        if (pos >= serialized.size() || serialized[pos] != '<') {
            throw ParseError("trice sequence: expected \"<token>\" after \"</s>\"");
        }
        const std::size_t close = serialized.find('>', pos + 1);
        if (close == std::string::npos) {
            throw ParseError("trice sequence: unterminated language token");
        }
        const std::string token = serialized.substr(pos + 1, close - pos - 1);
        if (text.empty() || token.empty()) {
            throw ParseError("trice sequence: empty text or language token");
        }
        units.emplace_back(text, token);
        pos = close + 1;
        if (pos < serialized.size()) {
            if (serialized[pos] != ';') {
                throw ParseError("trice sequence: expected \";\" between units");
            }
            ++pos;
            if (pos == serialized.size()) {
                throw ParseError("trice sequence: trailing \";\"");
            }
        }
    }
    if (units.size() < 2) {
        throw ParseError("trice sequence: need a source unit and at least one candidate");
    }
    TriceInput input;
    input.source_text = units[0].first;
    input.source_lang_token = units[0].second;
    input.target_lang_token = units[1].second;
    for (std::size_t i = 1; i < units.size(); ++i) {
        if (units[i].second != input.target_lang_token) {
            throw ParseError("trice sequence: candidate language tokens disagree");
        }
        input.candidates.push_back(units[i].first);
    }
    return input;
}

std::vector<std::string> fid_frames(const std::string& target_lang_name,
                                    const std::string& source_text,
                                    const std::vector<std::string>& candidates) {
    if (target_lang_name.empty()) {
        throw RenderError("fid frames require a target language name");
    }
    if (source_text.empty()) {
        throw RenderError("fid frames require a source text");
    }
    if (candidates.empty()) {
        throw RenderError("fid frames require at least one candidate");
    }
    std::vector<std::string> frames;
    frames.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        frames.push_back("Translate source into " + target_lang_name + " referring " +
                         target_lang_name + " candidate.\nsource: " + source_text +
                         "\ncandidate: " + candidate);
    }
    return frames;
}

MbrResult merge_mbr(const std::vector<std::string>& hypotheses, const MbrConfig& cfg) {
    if (hypotheses.empty()) {
        throw ConfigError("merge_mbr: empty hypothesis set");
    }
    const std::size_t n = hypotheses.size();
    if (n == 1) {
        return {0, {100.0}};
    }

    std::function<double(const std::string&, const std::string&)> utility = cfg.custom_utility;
    if (!utility) {
        if (cfg.utility == MbrConfig::Utility::ChrfPP) {
            utility = [](const std::string& hyp, const std::string& ref) {
                return sentence_chrf_pp(hyp, ref);
            };
        } else {
            utility = [](const std::string& hyp, const std::string& ref) {
                BleuConfig bleu;
                bleu.smoothing = BleuSmoothing::FloorEpsilon;
                return sentence_bleu(hyp, ref, bleu);
            };
        }
    }

    MbrResult result;
    result.expected_utilities.resize(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            double u = utility(hypotheses[i], hypotheses[j]);
            if (cfg.symmetrize) {
                u = (u + utility(hypotheses[j], hypotheses[i])) / 2.0;
            }
            total += u;
        }
        result.expected_utilities[i] = total / static_cast<double>(n - 1);
    }
    result.selected = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (result.expected_utilities[i] > result.expected_utilities[result.selected]) {
            result.selected = i;
        }
    }
    return result;
}

namespace {

std::vector<std::string> path_codes_of(const std::vector<ScoredCandidate>& scored) {
    std::vector<std::string> codes;
    codes.reserve(scored.size());
    for (const auto& entry : scored) {
        codes.push_back(entry.candidate.path.code());
    }
    return codes;
}

EnsembleOutput fuse_with_llm(const SourceSegment& segment,
                             const std::vector<std::string>& candidate_texts,
                             const std::vector<std::string>& input_codes,
                             const LanguageCode& target_lang, MergeStrategy strategy,
                             TranslationBackend& backend) {
    PromptSpec spec;
    spec.template_id = PromptTemplate::EnsembleFuse;
    spec.source_lang_name = segment.lang.display_name;
    spec.target_lang_name = target_lang.display_name;
    spec.source_text = segment.text;
    spec.candidates = candidate_texts;

    const std::string completion = backend.complete_prompt(render_prompt(spec));
    if (completion.empty()) {
        throw EmptyMergeOutput("LLM fusion returned an empty completion for segment " +
                               segment.id);
    }
    return EnsembleOutput{segment.id, completion, strategy, input_codes,
                          candidate_texts.size()};
}

}  // namespace

EnsembleOutput merge_llm(const SourceSegment& segment,
                         const std::vector<ScoredCandidate>& top_k,
                         TranslationBackend& backend) {
    if (top_k.empty()) {
        throw ConfigError("merge_llm: empty candidate list");
    }
    std::vector<std::string> texts;
    texts.reserve(top_k.size());
    for (const auto& entry : top_k) {
        texts.push_back(entry.candidate.text);
    }
    return fuse_with_llm(segment, texts, path_codes_of(top_k),
                         top_k.front().candidate.path.target_lang, MergeStrategy::LlmFusion,
                         backend);
}

EnsembleOutput merge_select_top1(const std::vector<ScoredCandidate>& top_k) {
    if (top_k.empty()) {
        throw ConfigError("merge_select_top1: empty candidate list");
    }
    const Candidate& best = top_k.front().candidate;
    return EnsembleOutput{best.segment_id, best.text, MergeStrategy::SelectionTop1,
                          path_codes_of(top_k), top_k.size()};
}

EnsembleOutput merge_mbr_select(const std::vector<ScoredCandidate>& top_k,
                                const MbrConfig& cfg) {
    if (top_k.empty()) {
        throw ConfigError("merge_mbr_select: empty candidate list");
    }
    std::vector<std::string> texts;
    texts.reserve(top_k.size());
    for (const auto& entry : top_k) {
        texts.push_back(entry.candidate.text);
    }
    const MbrResult choice = merge_mbr(texts, cfg);
    const Candidate& winner = top_k[choice.selected].candidate;
    return EnsembleOutput{winner.segment_id, winner.text, MergeStrategy::Mbr,
                          path_codes_of(top_k), top_k.size()};
}

EnsembleOutput merge_fixed_paths(const SourceSegment& segment, const CandidatePool& pool,
                                 const std::vector<TranslationPath>& fixed_paths,
                                 TranslationBackend& backend) {
    if (fixed_paths.empty()) {
        throw ConfigError("merge_fixed_paths: empty path list");
    }
    std::vector<std::string> texts;
    std::vector<std::string> codes;
    for (const auto& path : fixed_paths) {
        const auto it = std::find_if(pool.candidates.begin(), pool.candidates.end(),
                                     [&](const Candidate& c) { return c.path == path; });
        if (it == pool.candidates.end()) {
            throw InsufficientPaths("fixed-path merge: pool for segment " + pool.segment_id +
                                    " has no candidate for path " + path.code());
        }
        texts.push_back(it->text);
        codes.push_back(path.code());
    }
    return fuse_with_llm(segment, texts, codes, fixed_paths.front().target_lang,
                         MergeStrategy::FixedPaths, backend);
}

}  // namespace pivotmt
