#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "pivotmt/backend.hpp"
#include "pivotmt/core.hpp"

namespace pivotmt {

// The three deployed prompt shapes. ZeroShotTranslate is the plain
// translation instruction; EnsembleFuse numbers the candidates and asks for
// one fused translation; GenFuserConcat concatenates the candidates
// newline-separated for fusion-style models (the concatenation wording is
// this toolkit's own — upstream work defers the exact prompt to its citation).
enum class PromptTemplate { ZeroShotTranslate, EnsembleFuse, GenFuserConcat };

struct PromptSpec {
    PromptTemplate template_id = PromptTemplate::ZeroShotTranslate;
    std::string source_lang_name;  // display name, e.g. "Korean"
    std::string target_lang_name;
    std::string source_text;
    std::vector<std::string> candidates;  // empty for ZeroShotTranslate
};

// Byte-exact template rendering. Throws RenderError on violated
// preconditions: empty source/lang names, wrong candidate count for the
// template, or embedded newlines (which would let one candidate forge
// another's line and break prompt injectivity).
std::string render_prompt(const PromptSpec& spec);

// Input sequence for a sequence-to-sequence merging model that consumes
// "text</s><lang-token>" units joined by ";": first the source with its
// language token, then each candidate with the target token.
struct TriceInput {
    std::string source_text;
    std::string source_lang_token;
    std::string target_lang_token;
    std::vector<std::string> candidates;
};

// Serialized form: "x</s><l_s>;c1</s><l_t>;…;ck</s><l_t>". Texts must not
// contain the "</s>" separator (ConfigError) so parsing stays unambiguous.
std::string serialize_trice(const TriceInput& input);
TriceInput parse_trice(const std::string& serialized);

// One encoder frame per candidate:
// "Translate source into <tgt> referring <tgt> candidate.\nsource: x\ncandidate: ck".
std::vector<std::string> fid_frames(const std::string& target_lang_name,
                                    const std::string& source_text,
                                    const std::vector<std::string>& candidates);

// Minimum-Bayes-risk selection over a hypothesis set.
struct MbrConfig {
    enum class Utility { ChrfPP, BleuSentence };
    Utility utility = Utility::ChrfPP;
    bool symmetrize = false;  // average u(a,b) and u(b,a)
    // Test hook: when set, replaces the built-in utility. Must map a
    // (hypothesis, pseudo-reference) pair onto [0, 100].
    std::function<double(const std::string&, const std::string&)> custom_utility;
};

struct MbrResult {
    std::size_t selected = 0;
    std::vector<double> expected_utilities;  // one per hypothesis
};

// argmax_i mean_{j != i} utility(h_i, h_j); a single hypothesis wins with the
// scale maximum (100), ties go to the lowest index.
MbrResult merge_mbr(const std::vector<std::string>& hypotheses, const MbrConfig& cfg = {});

// Merge strategies producing the final per-segment output. All require a
// non-empty candidate list (ConfigError otherwise).

// Render the EnsembleFuse prompt over the candidates in the given (rank)
// order, send it to the backend, and wrap the completion. An empty completion
// is EmptyMergeOutput; backend errors propagate.
EnsembleOutput merge_llm(const SourceSegment& segment,
                         const std::vector<ScoredCandidate>& top_k,
                         TranslationBackend& backend);

// The ranker's pick, verbatim.
EnsembleOutput merge_select_top1(const std::vector<ScoredCandidate>& top_k);

// MBR over the candidate texts.
EnsembleOutput merge_mbr_select(const std::vector<ScoredCandidate>& top_k,
                                const MbrConfig& cfg = {});

// Fixed-path fusion: pull the candidates for `fixed_paths` out of the pool in
// exactly that order (conventionally direct first, then the English pivot)
// and fuse them with the LLM prompt. A fixed path missing from the pool is
// InsufficientPaths.
EnsembleOutput merge_fixed_paths(const SourceSegment& segment, const CandidatePool& pool,
                                 const std::vector<TranslationPath>& fixed_paths,
                                 TranslationBackend& backend);

}  // namespace pivotmt
