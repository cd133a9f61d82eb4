#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "mmkg/config.hpp"
#include "mmkg/diversity.hpp"
#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/qa.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

namespace refine_detail {

/// Case-folded, whitespace-collapsed form used for exact dedup keys.
inline std::string normalize(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char ch : s) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

} // namespace refine_detail

/// Keeps the first of any two pairs whose normalized (question, answer) match.
inline std::vector<QAPair> dedupe_exact(const std::vector<QAPair>& corpus) {
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<QAPair> out;
    for (const auto& p : corpus) {
        auto key = std::make_pair(refine_detail::normalize(p.question),
                                  refine_detail::normalize(p.answer));
        if (seen.insert(std::move(key)).second) out.push_back(p);
    }
    return out;
}

/// Greedy keep-first semantic dedup over question embeddings: a pair survives
/// only if its question stays below the cosine threshold against every
/// already-retained question. Output order is a subsequence of input order.
inline std::vector<QAPair> dedupe_semantic(const std::vector<QAPair>& corpus,
                                           const Embedder& embedder, double threshold,
                                           unsigned jobs = 1) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ValidationError("dedupe_semantic: threshold must be in (0, 1)");
    std::vector<EmbeddingVector> vectors(corpus.size());
    parallel_for(corpus.size(), jobs,
                 [&](size_t i) { vectors[i] = embedder.embed_text(corpus[i].question); });

    std::vector<QAPair> out;
    std::vector<size_t> kept;
    for (size_t i = 0; i < corpus.size(); ++i) {
        bool duplicate = false;
        for (size_t j : kept) {
            if (cosine(vectors[i], vectors[j]) >= threshold) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            kept.push_back(i);
            out.push_back(corpus[i]);
        }
    }
    return out;
}

/// K-Means over question embeddings; each cluster is truncated to the cap in
/// corpus order, so retention is deterministic.
inline std::vector<QAPair> balance(const std::vector<QAPair>& corpus, const Embedder& embedder,
                                   int k, size_t per_cluster_cap, std::uint64_t seed,
                                   unsigned jobs = 1) {
    if (corpus.empty()) return {};
    if (k < 1) throw ValidationError("balance: k must be >= 1");
    if (corpus.size() < static_cast<size_t>(k))
        throw ValidationError("balance: corpus smaller than k");
    std::vector<Point> points(corpus.size());
    parallel_for(corpus.size(), jobs,
                 [&](size_t i) { points[i] = embedder.embed_text(corpus[i].question).values; });
    auto assignment = kmeans(points, k, seed);

    std::map<int, size_t> taken;
    std::vector<QAPair> out;
    for (size_t i = 0; i < corpus.size(); ++i) {
        if (taken[assignment.labels[i]] >= per_cluster_cap) continue;
        ++taken[assignment.labels[i]];
        out.push_back(corpus[i]);
    }
    return out;
}

struct CurationEntry {
    bool is_pattern = false;
    std::string value; // pair id, or regex pattern
};

struct CurationRemoval {
    std::string pair_id;
    std::string matched_entry;
};

/// Blocklist file: one entry per line, `id:<pair-id>` or `re:<pattern>`
/// (pattern matched against the question, anywhere).
inline std::vector<CurationEntry> load_blocklist(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read blocklist: " + path.string());
    std::vector<CurationEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.rfind("id:", 0) == 0) entries.push_back({false, s.substr(3)});
        else if (s.rfind("re:", 0) == 0) entries.push_back({true, s.substr(3)});
        else throw ParseError("blocklist entry must start with `id:` or `re:`: " + s, lineno);
    }
    return entries;
}

inline std::vector<QAPair> apply_curation(const std::vector<QAPair>& corpus,
                                          const std::vector<CurationEntry>& blocklist,
                                          std::vector<CurationRemoval>* removal_log = nullptr) {
    std::vector<std::regex> patterns;
    for (const auto& e : blocklist) {
        if (!e.is_pattern) continue;
        try {
            patterns.emplace_back(e.value);
        } catch (const std::regex_error& err) {
            throw ValidationError("bad blocklist pattern `" + e.value + "`: " + err.what());
        }
    }

    std::vector<QAPair> out;
    for (const auto& p : corpus) {
        std::string matched;
        for (const auto& e : blocklist) {
            if (!e.is_pattern && e.value == p.id) {
                matched = "id:" + e.value;
                break;
            }
        }
        if (matched.empty()) {
            size_t pi = 0;
            for (const auto& e : blocklist) {
                if (!e.is_pattern) continue;
                if (std::regex_search(p.question, patterns[pi])) {
                    matched = "re:" + e.value;
                    break;
                }
                ++pi;
            }
        }
        if (matched.empty()) {
            out.push_back(p);
        } else if (removal_log != nullptr) {
            removal_log->push_back({p.id, matched});
        }
    }
    return out;
}

} // namespace mmkg
