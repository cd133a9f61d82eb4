#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline PrecisionRecallF1 make_prf(double p, double r) {
    PrecisionRecallF1 out{p, r, 0.0};
    if (p + r > 0.0) out.f1 = 2.0 * p * r / (p + r);
    return out;
}

namespace detail {

using TokenSpan = std::span<const std::string>;

inline std::map<std::vector<std::string>, int> ngram_counts(TokenSpan tokens, int n) {
    std::map<std::vector<std::string>, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i)
        counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                        tokens.begin() + static_cast<long>(i) + n)] += 1;
    return counts;
}

inline size_t lcs_length(TokenSpan a, TokenSpan b) {
    const size_t m = a.size(), n = b.size();
    std::vector<size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (size_t i = 1; i <= m; ++i) {
        for (size_t j = 1; j <= n; ++j) {
            if (a[i - 1] == b[j - 1]) cur[j] = prev[j - 1] + 1;
            else cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

} // namespace detail

/// BLEU-n: geometric mean of clipped (modified) n-gram precisions for orders
/// 1..n with the standard brevity penalty (1 when the candidate is longer than
/// the reference, exp(1 - r/c) otherwise). No smoothing: a zero-overlap order
/// makes the whole score 0. Empty candidate scores 0 by definition.
inline double bleu(detail::TokenSpan candidate, detail::TokenSpan reference, int n) {
    if (n < 1 || n > 4) throw ValidationError("bleu: order must be in [1, 4]");
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (int order = 1; order <= n; ++order) {
        auto cand = detail::ngram_counts(candidate, order);
        auto ref = detail::ngram_counts(reference, order);
        long total = 0, matched = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            auto it = ref.find(gram);
            if (it != ref.end()) matched += std::min(count, it->second);
        }
        if (total == 0 || matched == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / n);
}

/// ROUGE-N: clipped n-gram overlap over candidate (precision) and reference
/// (recall) n-gram totals.
inline PrecisionRecallF1 rouge_n(detail::TokenSpan candidate, detail::TokenSpan reference, int n) {
    if (n < 1) throw ValidationError("rouge_n: order must be >= 1");
    auto cand = detail::ngram_counts(candidate, n);
    auto ref = detail::ngram_counts(reference, n);
    long cand_total = 0, ref_total = 0, matched = 0;
    for (const auto& [_, count] : cand) cand_total += count;
    for (const auto& [_, count] : ref) ref_total += count;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) matched += std::min(count, it->second);
    }
    double p = cand_total > 0 ? static_cast<double>(matched) / static_cast<double>(cand_total) : 0.0;
    double r = ref_total > 0 ? static_cast<double>(matched) / static_cast<double>(ref_total) : 0.0;
    return make_prf(p, r);
}

/// ROUGE-L from the longest common subsequence length.
inline PrecisionRecallF1 rouge_l(detail::TokenSpan candidate, detail::TokenSpan reference) {
    if (candidate.empty() || reference.empty()) return {};
    double lcs = static_cast<double>(detail::lcs_length(candidate, reference));
    return make_prf(lcs / static_cast<double>(candidate.size()),
                    lcs / static_cast<double>(reference.size()));
}

/// Greedy-match token F1 over provider embeddings: every candidate token is
/// matched to its max-cosine reference token (precision), symmetrically for
/// recall. Bag semantics: invariant under token permutation of either side.
inline PrecisionRecallF1 token_f1(detail::TokenSpan candidate, detail::TokenSpan reference,
                                  const Embedder& embedder) {
    if (candidate.empty() || reference.empty()) return {};
    std::unordered_map<std::string, EmbeddingVector> cache;
    auto embed = [&](const std::string& tok) -> const EmbeddingVector& {
        auto it = cache.find(tok);
        if (it == cache.end())
            it = cache.emplace(tok, embedder.embed_text(tok)).first;
        return it->second;
    };
    auto greedy = [&](detail::TokenSpan from, detail::TokenSpan to) {
        double sum = 0.0;
        for (const auto& f : from) {
            double best = -1.0;
            const auto& fe = embed(f);
            for (const auto& t : to) best = std::max(best, cosine(fe, embed(t)));
            sum += best;
        }
        return sum / static_cast<double>(from.size());
    };
    return make_prf(greedy(candidate, reference), greedy(reference, candidate));
}

} // namespace mmkg
