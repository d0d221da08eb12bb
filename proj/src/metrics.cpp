#include "pivotmt/metrics.hpp"

#include <unicode/unorm2.h>
#include <unicode/ustring.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <regex>
#include <unordered_map>

namespace pivotmt {

namespace {

bool is_ascii(const std::string& text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return c < 0x80; });
}

bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

void replace_all(std::string& text, std::string_view needle, std::string_view repl) {
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), repl);
        pos += repl.size();
    }
}

std::vector<std::string> split_on_space(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (is_space_byte(c)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// UTF-8 -> code points; malformed bytes survive as single code points
// so counting stays total on garbage input.
std::u32string decode_utf8(const std::string& text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        std::size_t len = b0 >= 0xF0 ? 4 : b0 >= 0xE0 ? 3 : b0 >= 0xC0 ? 2 : 1;
        if (len == 1) {
            out.push_back(b0);
            ++i;
            continue;
        }
        if (i + len > text.size()) {
            out.push_back(b0);
            ++i;
            continue;
        }
        char32_t cp = b0 & (0xFFu >> (len + 1));
        bool valid = true;
        for (std::size_t k = 1; k < len; ++k) {
            const auto bk = static_cast<unsigned char>(text[i + k]);
            if ((bk & 0xC0u) != 0x80u) {
                valid = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3Fu);
        }
        if (!valid) {
            out.push_back(b0);
            ++i;
        } else {
            out.push_back(cp);
            i += len;
        }
    }
    return out;
}

}  // namespace

void BleuConfig::validate() const {
    if (max_ngram < 1) throw ConfigError("BLEU max_ngram must be >= 1");
    if (smoothing == BleuSmoothing::FloorEpsilon && epsilon <= 0.0) {
        throw ConfigError("BLEU floor smoothing requires epsilon > 0");
    }
}

void ChrfConfig::validate() const {
    if (char_order < 1) throw ConfigError("chrF char_order must be >= 1");
    if (word_order < 0) throw ConfigError("chrF word_order must be >= 0");
    if (beta <= 0.0) throw ConfigError("chrF beta must be > 0");
}

std::string to_nfc(const std::string& text) {
    if (is_ascii(text)) return text;  // ASCII is already NFC

    UErrorCode status = U_ZERO_ERROR;
    const UNormalizer2* nfc = unorm2_getNFCInstance(&status);
    if (U_FAILURE(status)) throw MetricError("ICU NFC normalizer unavailable");

    // UTF-8 -> UTF-16
    std::vector<UChar> utf16(text.size() + 1);
    int32_t utf16_len = 0;
    u_strFromUTF8(utf16.data(), static_cast<int32_t>(utf16.size()), &utf16_len, text.data(),
                  static_cast<int32_t>(text.size()), &status);
    if (U_FAILURE(status)) {
        // Not valid UTF-8: leave the bytes untouched rather than corrupt them.
        return text;
    }

    std::vector<UChar> normalized(static_cast<std::size_t>(utf16_len) * 3 + 16);
    const int32_t norm_len =
        unorm2_normalize(nfc, utf16.data(), utf16_len, normalized.data(),
                         static_cast<int32_t>(normalized.size()), &status);
    if (U_FAILURE(status)) throw MetricError("ICU NFC normalization failed");

    std::string out(static_cast<std::size_t>(norm_len) * 3 + 16, '\0');
    int32_t out_len = 0;
    u_strToUTF8(out.data(), static_cast<int32_t>(out.size()), &out_len, normalized.data(),
                norm_len, &status);
    if (U_FAILURE(status)) throw MetricError("ICU UTF-8 conversion failed");
    out.resize(static_cast<std::size_t>(out_len));
    return out;
}

std::vector<std::string> tokenize_13a(const std::string& text) {
    std::string line = to_nfc(text);
    replace_all(line, "<skipped>", "");
    replace_all(line, "-\n", "");
    replace_all(line, "\n", " ");
    if (line.find('&') != std::string::npos) {
        replace_all(line, "&quot;", "\"");
        replace_all(line, "&amp;", "&");
        replace_all(line, "&lt;", "<");
        replace_all(line, "&gt;", ">");
    }
    line = " " + line + " ";

    // ASCII punctuation split into its own tokens, except .,- and '
    // (periods/commas separate unless inside numbers; dashes separate
    // only after digits; apostrophes never separate).
    static const std::regex punct(R"regex(([ !"#$%&()*+/:;<=>?@\[\\\]^_`{|}~]))regex");
    static const std::regex period_comma_before(R"(([^0-9])([\.,]))");
    static const std::regex period_comma_after(R"(([\.,])([^0-9]))");
    static const std::regex digit_dash(R"(([0-9])(-))");

    line = std::regex_replace(line, punct, " $1 ");
    line = std::regex_replace(line, period_comma_before, "$1 $2 ");
    line = std::regex_replace(line, period_comma_after, " $1 $2");
    line = std::regex_replace(line, digit_dash, "$1 $2 ");

    return split_on_space(line);
}

std::vector<std::string> tokenize_whitespace(const std::string& text) {
    return split_on_space(to_nfc(text));
}

namespace {

std::vector<std::string> tokenize(const std::string& text, BleuTokenizer tokenizer) {
    return tokenizer == BleuTokenizer::Thirteen_a ? tokenize_13a(text)
                                                  : tokenize_whitespace(text);
}

// Joined token n-gram -> occurrence count. 0x1F never occurs in tokens
// produced by whitespace splitting, so the join is unambiguous.
std::unordered_map<std::string, long long> ngram_counts(const std::vector<std::string>& tokens,
                                                        std::size_t n) {
    std::unordered_map<std::string, long long> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t t = 1; t < n; ++t) {
            key.push_back('\x1f');
            key += tokens[i + t];
        }
        ++counts[key];
    }
    return counts;
}

struct BleuTally {
    long long matched = 0;
    long long total = 0;
};

void tally_order(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                 std::size_t n, BleuTally& tally) {
    if (hyp.size() >= n) tally.total += static_cast<long long>(hyp.size() - n + 1);
    const auto hyp_counts = ngram_counts(hyp, n);
    if (hyp_counts.empty()) return;
    const auto ref_counts = ngram_counts(ref, n);
    for (const auto& [gram, count] : hyp_counts) {
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) tally.matched += std::min(count, it->second);
    }
}

double brevity_penalty(long long hyp_len, long long ref_len) {
    if (hyp_len >= ref_len) return 1.0;
    return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

}  // namespace

double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references, const BleuConfig& cfg) {
    cfg.validate();
    if (hypotheses.size() != references.size()) {
        throw InputMismatch("corpus_bleu: " + std::to_string(hypotheses.size()) +
                            " hypotheses vs " + std::to_string(references.size()) +
                            " references");
    }
    if (hypotheses.empty()) throw InputMismatch("corpus_bleu: empty corpus");

    const auto orders = static_cast<std::size_t>(cfg.max_ngram);
    std::vector<BleuTally> tallies(orders);
    long long hyp_len = 0;
    long long ref_len = 0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto hyp = tokenize(hypotheses[s], cfg.tokenizer);
        const auto ref = tokenize(references[s], cfg.tokenizer);
        hyp_len += static_cast<long long>(hyp.size());
        ref_len += static_cast<long long>(ref.size());
        for (std::size_t n = 1; n <= orders; ++n) tally_order(hyp, ref, n, tallies[n - 1]);
    }
    if (hyp_len == 0) return 0.0;

    double log_sum = 0.0;
    for (const auto& tally : tallies) {
        if (tally.matched == 0 || tally.total == 0) return 0.0;
        log_sum +=
            std::log(static_cast<double>(tally.matched) / static_cast<double>(tally.total));
    }
    return 100.0 * brevity_penalty(hyp_len, ref_len) *
           std::exp(log_sum / static_cast<double>(orders));
}

double sentence_bleu(const std::string& hypothesis, const std::string& reference,
                     const BleuConfig& cfg) {
    cfg.validate();
    const auto hyp = tokenize(hypothesis, cfg.tokenizer);
    const auto ref = tokenize(reference, cfg.tokenizer);
    if (hyp.empty()) return 0.0;

    double log_sum = 0.0;
    int effective = 0;
    for (std::size_t n = 1; n <= static_cast<std::size_t>(cfg.max_ngram); ++n) {
        BleuTally tally;
        tally_order(hyp, ref, n, tally);
        if (tally.total == 0) continue;  // hypothesis shorter than n: skip order
        double p;
        if (tally.matched > 0) {
            p = static_cast<double>(tally.matched) / static_cast<double>(tally.total);
        } else if (cfg.smoothing == BleuSmoothing::FloorEpsilon) {
            p = cfg.epsilon / static_cast<double>(tally.total);
        } else {
            return 0.0;
        }
        log_sum += std::log(p);
        ++effective;
    }
    if (effective == 0) return 0.0;
    return 100.0 * brevity_penalty(static_cast<long long>(hyp.size()),
                                   static_cast<long long>(ref.size())) *
           std::exp(log_sum / effective);
}

namespace {

bool is_ascii_punct(char c) {
    static const std::string punct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    return punct.find(c) != std::string::npos;
}

// chrF++ word tokenization: one trailing OR leading ASCII punctuation
// character peeled off per whitespace token (trailing wins); tokens of
// a single code point stay whole.
std::vector<std::string> chrf_words(const std::string& text) {
    std::vector<std::string> words;
    for (auto& token : split_on_space(text)) {
        if (token.size() <= 1 || decode_utf8(token).size() <= 1) {
            words.push_back(std::move(token));
            continue;
        }
        if (is_ascii_punct(token.back())) {
            words.push_back(token.substr(0, token.size() - 1));
            words.emplace_back(1, token.back());
        } else if (is_ascii_punct(token.front())) {
            words.emplace_back(1, token.front());
            words.push_back(token.substr(1));
        } else {
            words.push_back(std::move(token));
        }
    }
    return words;
}

struct ChrfOrderStats {
    long long hyp_total = 0;
    long long ref_total = 0;
    long long matched = 0;
};

template <typename Key>
void count_match(const std::unordered_map<Key, long long>& hyp_counts,
                 const std::unordered_map<Key, long long>& ref_counts, ChrfOrderStats& stats) {
    for (const auto& [gram, count] : hyp_counts) {
        stats.hyp_total += count;
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) stats.matched += std::min(count, it->second);
    }
    for (const auto& [gram, count] : ref_counts) stats.ref_total += count;
}

std::unordered_map<std::u32string, long long> char_ngram_counts(const std::u32string& chars,
                                                                std::size_t n) {
    std::unordered_map<std::u32string, long long> counts;
    if (chars.size() < n) return counts;
    for (std::size_t i = 0; i + n <= chars.size(); ++i) ++counts[chars.substr(i, n)];
    return counts;
}

struct ChrfSegment {
    std::u32string chars;                // whitespace-stripped code points
    std::vector<std::string> words;      // punctuation-separated words
};

ChrfSegment chrf_prepare(const std::string& text, const ChrfConfig& cfg) {
    const std::string normalized = to_nfc(text);
    std::string stripped;
    stripped.reserve(normalized.size());
    for (char c : normalized) {
        if (!is_space_byte(c)) stripped.push_back(c);
    }
    ChrfSegment segment;
    segment.chars = decode_utf8(stripped);
    if (cfg.word_order > 0) segment.words = chrf_words(normalized);
    return segment;
}

void accumulate_chrf(const ChrfSegment& hyp, const ChrfSegment& ref, const ChrfConfig& cfg,
                     std::vector<ChrfOrderStats>& stats) {
    for (int n = 1; n <= cfg.char_order; ++n) {
        count_match(char_ngram_counts(hyp.chars, static_cast<std::size_t>(n)),
                    char_ngram_counts(ref.chars, static_cast<std::size_t>(n)),
                    stats[static_cast<std::size_t>(n - 1)]);
    }
    for (int n = 1; n <= cfg.word_order; ++n) {
        count_match(ngram_counts(hyp.words, static_cast<std::size_t>(n)),
                    ngram_counts(ref.words, static_cast<std::size_t>(n)),
                    stats[static_cast<std::size_t>(cfg.char_order + n - 1)]);
    }
}

// Average precision and recall over the orders seen on either side,
// then one F_beta. All orders empty on both sides means both strings
// were empty: a perfect match by convention.
double chrf_from_stats(const std::vector<ChrfOrderStats>& stats, double beta) {
    double precision_sum = 0.0;
    double recall_sum = 0.0;
    int effective = 0;
    for (const auto& s : stats) {
        if (s.hyp_total == 0 && s.ref_total == 0) continue;
        if (s.hyp_total > 0) {
            precision_sum += static_cast<double>(s.matched) / static_cast<double>(s.hyp_total);
        }
        if (s.ref_total > 0) {
            recall_sum += static_cast<double>(s.matched) / static_cast<double>(s.ref_total);
        }
        ++effective;
    }
    if (effective == 0) return 100.0;
    const double precision = precision_sum / effective;
    const double recall = recall_sum / effective;
    const double b2 = beta * beta;
    const double denominator = b2 * precision + recall;
    if (denominator <= 0.0) return 0.0;
    return 100.0 * (1.0 + b2) * precision * recall / denominator;
}

}  // namespace

double sentence_chrf_pp(const std::string& hypothesis, const std::string& reference,
                        const ChrfConfig& cfg) {
    cfg.validate();
    std::vector<ChrfOrderStats> stats(static_cast<std::size_t>(cfg.char_order + cfg.word_order));
    accumulate_chrf(chrf_prepare(hypothesis, cfg), chrf_prepare(reference, cfg), cfg, stats);
    return chrf_from_stats(stats, cfg.beta);
}

double corpus_chrf_pp(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references, const ChrfConfig& cfg) {
    cfg.validate();
    if (hypotheses.size() != references.size()) {
        throw InputMismatch("corpus_chrf_pp: " + std::to_string(hypotheses.size()) +
                            " hypotheses vs " + std::to_string(references.size()) +
                            " references");
    }
    if (hypotheses.empty()) throw InputMismatch("corpus_chrf_pp: empty corpus");

    std::vector<ChrfOrderStats> stats(static_cast<std::size_t>(cfg.char_order + cfg.word_order));
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        accumulate_chrf(chrf_prepare(hypotheses[s], cfg), chrf_prepare(references[s], cfg), cfg,
                        stats);
    }
    return chrf_from_stats(stats, cfg.beta);
}

}  // namespace pivotmt
