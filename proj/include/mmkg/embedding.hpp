#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmkg/errors.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

/// Fixed-dimension real vector, unit L2 norm after provider normalization.
struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }

    double norm() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }

    /// Scales to unit norm. Throws ProviderError on non-finite or zero input,
    /// so a broken provider is surfaced instead of silently propagated.
    void normalize() {
        double s = 0.0;
        for (double v : values) {
            if (!std::isfinite(v)) throw ProviderError("non-finite embedding component");
            s += v * v;
        }
        if (s == 0.0) throw ProviderError("zero embedding vector cannot be normalized");
        double inv = 1.0 / std::sqrt(s);
        for (double& v : values) v *= inv;
    }
};

/// Exact dot product of unit vectors; symmetric, in [-1, 1] up to rounding.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.dim()) +
                              " vs " + std::to_string(b.dim()) + ")");
    double dot = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return dot;
}

/// Uniform provider interface for text and image embeddings. Providers are
/// pure functions of (input, provider config) and safe for concurrent calls.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual size_t dim() const = 0;
    virtual EmbeddingVector embed_text(std::string_view text) const = 0;
    virtual EmbeddingVector embed_image(const std::filesystem::path& image_ref) const = 0;
};

/// Sidecar caption convention: for image `dish.jpg` the caption, when present,
/// lives in `dish.jpg.caption`.
inline std::filesystem::path caption_sidecar(const std::filesystem::path& image_ref) {
    std::filesystem::path p = image_ref;
    p += ".caption";
    return p;
}

/// Deterministic reference embedder: a normalized hashed bag-of-tokens over
/// D buckets. Token-overlapping strings score strictly higher cosine than
/// token-disjoint strings of equal length (modulo bucket collisions), which is
/// what the mismatch and dedup tests rely on.
///
/// Images embed as the tokens of (filename stem + optional `.caption` sidecar
/// text) plus one token derived from the file bytes, so byte-different files
/// get distinct vectors while caption/text pairs stay measurably similar.
class ReferenceEmbedder final : public Embedder {
public:
    static constexpr size_t kDim = 256;

    size_t dim() const override { return kDim; }

    EmbeddingVector embed_text(std::string_view text) const override {
        if (text.empty()) throw ValidationError("embed_text: empty text");
        auto tokens = tokenize(text);
        if (tokens.empty())
            throw ValidationError("embed_text: input has no alphanumeric tokens");
        return from_tokens(tokens);
    }

    EmbeddingVector embed_image(const std::filesystem::path& image_ref) const override {
        std::string bytes = read_file(image_ref); // throws IoError if unreadable
        auto tokens = tokenize(image_ref.stem().string());
        auto sidecar = caption_sidecar(image_ref);
        if (std::filesystem::exists(sidecar)) {
            auto caption_tokens = tokenize(read_file(sidecar));
            tokens.insert(tokens.end(), caption_tokens.begin(), caption_tokens.end());
        }
        tokens.push_back("bytes" + to_hex(fnv1a64(bytes)));
        return from_tokens(tokens);
    }

    /// Bucket index a token hashes into; exposed so fixtures can be built
    /// collision-aware.
    static size_t bucket(std::string_view token) {
        return static_cast<size_t>(fnv1a64(token) % kDim);
    }

private:
    static EmbeddingVector from_tokens(const std::vector<std::string>& tokens) {
        EmbeddingVector e;
        e.values.assign(kDim, 0.0);
        for (const auto& t : tokens) e.values[bucket(t)] += 1.0;
        e.normalize();
        return e;
    }
};

/// TF-IDF embedder fit on a corpus. Smoothed inverse document frequency
/// (ln((1+N)/(1+df)) + 1) keeps every in-vocabulary term strictly positive, so
/// no document collapses to a zero vector. Dimension is the vocabulary size.
class TfIdfEmbedder final : public Embedder {
public:
    static TfIdfEmbedder fit(std::span<const std::string> docs) {
        TfIdfEmbedder emb;
        std::map<std::string, size_t> df;
        for (const auto& doc : docs) {
            auto tokens = tokenize(doc);
            std::map<std::string, int> seen;
            for (const auto& t : tokens) seen[t] = 1;
            for (const auto& [t, _] : seen) df[t] += 1;
        }
        const double n = static_cast<double>(docs.size());
        for (const auto& [term, count] : df) {
            emb.index_[term] = emb.idf_.size();
            emb.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
        }
        if (emb.idf_.empty())
            throw ValidationError("TfIdfEmbedder: corpus produced an empty vocabulary");
        return emb;
    }

    size_t dim() const override { return idf_.size(); }

    EmbeddingVector embed_text(std::string_view text) const override {
        if (text.empty()) throw ValidationError("embed_text: empty text");
        auto tokens = tokenize(text);
        EmbeddingVector e;
        e.values.assign(idf_.size(), 0.0);
        bool any = false;
        for (const auto& t : tokens) {
            auto it = index_.find(t);
            if (it == index_.end()) continue; // out-of-vocabulary tokens are dropped
            e.values[it->second] += idf_[it->second];
            any = true;
        }
        if (!any)
            throw ValidationError("embed_text: no in-vocabulary tokens in input");
        e.normalize();
        return e;
    }

    EmbeddingVector embed_image(const std::filesystem::path& image_ref) const override {
        std::string text = image_ref.stem().string();
        auto sidecar = caption_sidecar(image_ref);
        if (!std::filesystem::exists(image_ref))
            throw IoError("cannot read file: " + image_ref.string());
        if (std::filesystem::exists(sidecar)) text += " " + read_file(sidecar);
        return embed_text(text);
    }

    double idf(const std::string& term) const {
        auto it = index_.find(term);
        return it == index_.end() ? 0.0 : idf_[it->second];
    }

private:
    std::map<std::string, size_t> index_;
    std::vector<double> idf_;
};

} // namespace mmkg
