#pragma once

#include <string>
#include <vector>

#include "pivotmt/errors.hpp"

namespace pivotmt {

enum class BleuTokenizer { Thirteen_a, Whitespace };
enum class BleuSmoothing { None, FloorEpsilon };

struct BleuConfig {
    int max_ngram = 4;
    BleuTokenizer tokenizer = BleuTokenizer::Thirteen_a;
    // Smoothing applies at sentence level only: corpus_bleu aggregates
    // counts corpus-wide and never smooths.
    BleuSmoothing smoothing = BleuSmoothing::None;
    double epsilon = 0.1;

    void validate() const;  // throws ConfigError on bad bounds
};

struct ChrfConfig {
    int char_order = 6;
    int word_order = 2;
    double beta = 2.0;

    void validate() const;  // throws ConfigError on bad bounds
};

/// Unicode NFC normalization (applied before any tokenization so byte
/// comparisons are stable across composed/decomposed inputs).
std::string to_nfc(const std::string& text);

/// mteval-13a-compatible tokenization: skipped-span removal, HTML
/// entity unescaping, punctuation separation except inside numbers,
/// whitespace split. Deterministic and idempotent on rejoined output.
std::vector<std::string> tokenize_13a(const std::string& text);

/// Plain whitespace tokenization (fallback for languages whose
/// reference tokenizer is an external analyzer).
std::vector<std::string> tokenize_whitespace(const std::string& text);

/// Corpus BLEU in [0,100]: clipped n-gram counts aggregated over the
/// corpus, geometric mean over orders 1..max_ngram, brevity penalty
/// exp(1 - ref_len/hyp_len) when the hypothesis corpus is shorter.
/// Never smoothed; any order with zero matches yields 0.0.
/// Throws InputMismatch when |hypotheses| != |references| or both are
/// empty.
double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references, const BleuConfig& cfg = {});

/// Sentence BLEU for diagnostics and MBR utility. Honors cfg.smoothing:
/// FloorEpsilon replaces zero match counts with epsilon/total; orders
/// longer than the hypothesis are skipped (effective order).
double sentence_bleu(const std::string& hypothesis, const std::string& reference,
                     const BleuConfig& cfg = {});

/// Sentence chrF++ in [0,100]: character n-grams (1..char_order) over
/// whitespace-stripped code points plus word n-grams (1..word_order)
/// over punctuation-separated words; precisions and recalls averaged
/// across orders, then a single F_beta. Orders empty on both sides are
/// skipped; empty-vs-empty scores 100, empty-vs-nonempty scores 0.
double sentence_chrf_pp(const std::string& hypothesis, const std::string& reference,
                        const ChrfConfig& cfg = {});

/// Corpus chrF++: per-order statistics summed over all pairs before the
/// F computation; reduces to sentence_chrf_pp for a single pair.
/// Throws InputMismatch on length mismatch or empty corpus.
double corpus_chrf_pp(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references, const ChrfConfig& cfg = {});

}  // namespace pivotmt
