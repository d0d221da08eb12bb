#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "pivotmt/backend.hpp"
#include "pivotmt/core.hpp"

namespace pivotmt {

// Reference-free quality estimation: score (source, hypothesis) pairs, higher
// is better. Real deployments call an external scoring service; the other
// implementations exist so pipelines and tests run offline.
class QeScorer {
public:
    virtual ~QeScorer() = default;

    // Batch form; returns one score per pair, order preserved.
    virtual std::vector<double> score_batch(const std::vector<std::string>& sources,
                                            const std::vector<std::string>& hypotheses) = 0;

    // Pool-aware entry used by score_pool. The default builds one
    // (segment text, candidate text) pair per candidate.
    virtual std::vector<double> score_pool_candidates(const SourceSegment& segment,
                                                      const CandidatePool& pool);

    virtual std::string id() const = 0;
};

// Fixture scorer: an explicit hypothesis → score map. A hypothesis missing
// from the map is a broken fixture, not a scoring result.
class CannedQe : public QeScorer {
public:
    void set_score(const std::string& hypothesis, double score);

    std::vector<double> score_batch(const std::vector<std::string>& sources,
                                    const std::vector<std::string>& hypotheses) override;
    std::string id() const override { return "qe:canned"; }

private:
    std::map<std::string, double> scores_;
};

// Offline stand-in scorer: rates each candidate by surface similarity
// (sentence chrF++) to the pool's direct-path candidate, falling back to the
// first candidate when no direct path survived. This is NOT a faithful
// quality estimator — it exists so the full pipeline runs without a scoring
// service. The generic batch form compares hypothesis to source text, which
// is only plumbing.
class LexicalProxyQe : public QeScorer {
public:
    std::vector<double> score_batch(const std::vector<std::string>& sources,
                                    const std::vector<std::string>& hypotheses) override;
    std::vector<double> score_pool_candidates(const SourceSegment& segment,
                                              const CandidatePool& pool) override;
    std::string id() const override { return "qe:lexical_proxy"; }
};

// HTTP scorer: POST /score with [{"source","hypothesis"},…] → [{"score"},…],
// batched to config.max_batch. Transport-level failure becomes QeUnavailable.
class ExternalQe : public QeScorer {
public:
    explicit ExternalQe(BackendConfig cfg);

    std::vector<double> score_batch(const std::vector<std::string>& sources,
                                    const std::vector<std::string>& hypotheses) override;
    std::string id() const override { return "qe:" + cfg_.endpoint; }

    const BackendConfig& config() const { return cfg_; }

private:
    BackendConfig cfg_;
};

// Decorator answering from the cache whenever possible; only misses reach the
// wrapped scorer. Batch scoring caches per (source, hypothesis) pair; pool
// scoring caches the whole pool because a scorer's pool semantics are opaque
// (LexicalProxyQe scores against the pool's own direct candidate).
class CachingQe : public QeScorer {
public:
    CachingQe(QeScorer& inner, Cache& cache);

    std::vector<double> score_batch(const std::vector<std::string>& sources,
                                    const std::vector<std::string>& hypotheses) override;
    std::vector<double> score_pool_candidates(const SourceSegment& segment,
                                              const CandidatePool& pool) override;
    std::string id() const override { return inner_.id(); }

private:
    QeScorer& inner_;
    Cache& cache_;
};

struct RankingConfig {
    std::size_t k = 3;  // pool ranking keeps the top 3 unless configured otherwise

    void validate() const;
};

// Score every candidate in the pool; output order equals pool order.
// Non-finite scores from the scorer are a protocol violation.
std::vector<ScoredCandidate> score_pool(const SourceSegment& segment, const CandidatePool& pool,
                                        QeScorer& qe);

// Index permutation sorting `scores` descending, ties keeping input order.
// When `comparisons` is non-null, the number of comparator calls is recorded
// (the sort is O(N log N), not pairwise-quadratic).
std::vector<std::size_t> descending_order(const std::vector<double>& scores,
                                          std::size_t* comparisons = nullptr);

// The k highest-scoring candidates, descending, ties broken by input (pool)
// order. k larger than the pool clamps with a warning: a degraded pool can be
// smaller than the configured k.
std::vector<ScoredCandidate> select_top_k(const std::vector<ScoredCandidate>& scored,
                                          const RankingConfig& cfg);

}  // namespace pivotmt
