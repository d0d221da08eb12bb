#include "pivotmt/qe_ranking.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pivotmt/errors.hpp"
#include "pivotmt/metrics.hpp"

namespace pivotmt {

using nlohmann::json;

std::vector<double> QeScorer::score_pool_candidates(const SourceSegment& segment,
                                                    const CandidatePool& pool) {
    std::vector<std::string> sources;
    std::vector<std::string> hypotheses;
    sources.reserve(pool.candidates.size());
    hypotheses.reserve(pool.candidates.size());
    for (const auto& candidate : pool.candidates) {
        sources.push_back(segment.text);
        hypotheses.push_back(candidate.text);
    }
    return score_batch(sources, hypotheses);
}

void CannedQe::set_score(const std::string& hypothesis, double score) {
    scores_[hypothesis] = score;
}

std::vector<double> CannedQe::score_batch(const std::vector<std::string>& /*sources*/,
                                          const std::vector<std::string>& hypotheses) {
    std::vector<double> out;
    out.reserve(hypotheses.size());
    for (const auto& hypothesis : hypotheses) {
        const auto it = scores_.find(hypothesis);
        if (it == scores_.end()) {
            throw FixtureGap("no canned QE score for hypothesis: " + hypothesis);
        }
        out.push_back(it->second);
    }
    return out;
}

std::vector<double> LexicalProxyQe::score_batch(const std::vector<std::string>& sources,
                                                const std::vector<std::string>& hypotheses) {
    if (sources.size() != hypotheses.size()) {
        throw ConfigError("QE batch: source/hypothesis count mismatch");
    }
    std::vector<double> out;
    out.reserve(hypotheses.size());
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        out.push_back(sentence_chrf_pp(hypotheses[i], sources[i]));
    }
    return out;
}

std::vector<double> LexicalProxyQe::score_pool_candidates(const SourceSegment& /*segment*/,
                                                          const CandidatePool& pool) {
    // Pseudo-reference: the direct-path candidate when one survived, else the
    // first candidate in the pool.
    const std::string* reference = nullptr;
    for (const auto& candidate : pool.candidates) {
        if (candidate.path.is_direct()) {
            reference = &candidate.text;
            break;
        }
    }
    if (reference == nullptr && !pool.candidates.empty()) {
        reference = &pool.candidates.front().text;
    }
    std::vector<double> out;
    out.reserve(pool.candidates.size());
    for (const auto& candidate : pool.candidates) {
        out.push_back(sentence_chrf_pp(candidate.text, *reference));
    }
    return out;
}

ExternalQe::ExternalQe(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
}

std::vector<double> ExternalQe::score_batch(const std::vector<std::string>& sources,
                                            const std::vector<std::string>& hypotheses) {
    if (sources.size() != hypotheses.size()) {
        throw ConfigError("QE batch: source/hypothesis count mismatch");
    }
    std::vector<double> out;
    out.reserve(sources.size());
    for (std::size_t start = 0; start < sources.size(); start += cfg_.max_batch) {
        const std::size_t end = std::min(start + cfg_.max_batch, sources.size());
        json payload = json::array();
        for (std::size_t i = start; i < end; ++i) {
            payload.push_back({{"source", sources[i]}, {"hypothesis", hypotheses[i]}});
        }
        json reply;
        try {
            reply = http_post_json(cfg_, "/score", payload);
        } catch (const BackendUnavailable& e) {
            throw QeUnavailable(std::string("QE service: ") + e.what());
        }
        if (!reply.is_array() || reply.size() != end - start) {
            throw ProtocolError("QE response is not an array of " +
                                    std::to_string(end - start) + " scores",
                                reply.dump().substr(0, 200));
        }
        for (const auto& item : reply) {
            if (!item.contains("score") || !item["score"].is_number()) {
                throw ProtocolError("QE response item lacks a numeric \"score\"",
                                    item.dump().substr(0, 200));
            }
            out.push_back(item["score"].get<double>());
        }
    }
    return out;
}

namespace {

// A cached double survives the string round-trip exactly: canonical JSON
// prints the shortest representation that parses back to the same value.
std::string encode_score(double score) { return canonical_json(json(score)); }

double decode_score(const std::string& text) { return json::parse(text).get<double>(); }

}  // namespace

CachingQe::CachingQe(QeScorer& inner, Cache& cache) : inner_(inner), cache_(cache) {}

std::vector<double> CachingQe::score_batch(const std::vector<std::string>& sources,
                                           const std::vector<std::string>& hypotheses) {
    if (sources.size() != hypotheses.size()) {
        throw ConfigError("QE batch: source/hypothesis count mismatch");
    }
    std::vector<double> out(sources.size(), 0.0);
    std::vector<std::size_t> miss_indices;
    std::vector<CacheKey> keys;
    keys.reserve(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
        keys.push_back(make_cache_key(
            CacheOp::QeScore, json{{"source", sources[i]}, {"hypothesis", hypotheses[i]}},
            inner_.id()));
        if (const auto hit = cache_.get(keys[i])) {
            out[i] = decode_score(*hit);
        } else {
            miss_indices.push_back(i);
        }
    }
    if (!miss_indices.empty()) {
        std::vector<std::string> miss_sources;
        std::vector<std::string> miss_hypotheses;
        miss_sources.reserve(miss_indices.size());
        miss_hypotheses.reserve(miss_indices.size());
        for (const std::size_t i : miss_indices) {
            miss_sources.push_back(sources[i]);
            miss_hypotheses.push_back(hypotheses[i]);
        }
        const std::vector<double> fresh = inner_.score_batch(miss_sources, miss_hypotheses);
        if (fresh.size() != miss_indices.size()) {
            throw ProtocolError("QE returned " + std::to_string(fresh.size()) + " scores for " +
                                std::to_string(miss_indices.size()) + " pairs");
        }
        for (std::size_t m = 0; m < miss_indices.size(); ++m) {
            out[miss_indices[m]] = fresh[m];
            cache_.put(keys[miss_indices[m]], encode_score(fresh[m]));
        }
    }
    return out;
}

std::vector<double> CachingQe::score_pool_candidates(const SourceSegment& segment,
                                                     const CandidatePool& pool) {
    // Whole-pool key: pool-aware scorers may rate candidates against each
    // other, so individual pair entries would be wrong here.
    json payload = {{"scope", "pool"}, {"source", segment.text}};
    json candidates = json::array();
    for (const auto& candidate : pool.candidates) {
        candidates.push_back({{"text", candidate.text}, {"path", candidate.path.code()}});
    }
    payload["candidates"] = std::move(candidates);
    const CacheKey key = make_cache_key(CacheOp::QeScore, payload, inner_.id());
    if (const auto hit = cache_.get(key)) {
        return json::parse(*hit).get<std::vector<double>>();
    }
    const std::vector<double> scores = inner_.score_pool_candidates(segment, pool);
    cache_.put(key, canonical_json(json(scores)));
    return scores;
}

void RankingConfig::validate() const {
    if (k < 1) {
        throw ConfigError("ranking k must be >= 1");
    }
}

std::vector<ScoredCandidate> score_pool(const SourceSegment& segment, const CandidatePool& pool,
                                        QeScorer& qe) {
    if (pool.candidates.empty()) {
        throw ConfigError("score_pool: empty candidate pool for segment " + pool.segment_id);
    }
    const std::vector<double> scores = qe.score_pool_candidates(segment, pool);
    if (scores.size() != pool.candidates.size()) {
        throw ProtocolError("QE returned " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(pool.candidates.size()) + " candidates");
    }
    std::vector<ScoredCandidate> out;
    out.reserve(pool.candidates.size());
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw ProtocolError("QE produced a non-finite score for candidate " +
                                std::to_string(i) + " of segment " + pool.segment_id);
        }
        out.push_back({pool.candidates[i], scores[i]});
    }
    return out;
}

std::vector<std::size_t> descending_order(const std::vector<double>& scores,
                                          std::size_t* comparisons) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    // stable_sort keeps equal-score entries in input order, which is the
    // documented tie-break, and stays O(N log N) comparisons.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (comparisons != nullptr) {
            ++*comparisons;
        }
        return scores[a] > scores[b];
    });
    return order;
}

std::vector<ScoredCandidate> select_top_k(const std::vector<ScoredCandidate>& scored,
                                          const RankingConfig& cfg) {
    cfg.validate();
    if (scored.empty()) {
        throw ConfigError("select_top_k: empty candidate list");
    }
    std::size_t k = cfg.k;
    if (k > scored.size()) {
        std::cerr << "warning: k=" << k << " exceeds pool size " << scored.size()
                  << "; clamping\n";
        k = scored.size();
    }
    std::vector<double> scores;
    scores.reserve(scored.size());
    for (const auto& entry : scored) {
        scores.push_back(entry.score);
    }
    const std::vector<std::size_t> order = descending_order(scores);
    std::vector<ScoredCandidate> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back(scored[order[i]]);
    }
    return out;
}

}  // namespace pivotmt
