#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmkg/consistency.hpp"
#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/kg.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

struct IndexEntry {
    EntityId entity;
    ImageLink image;
    EmbeddingVector vector;
};

/// Exact nearest-neighbor index over the KG's verified image links; a linear
/// scan is deterministic and plenty at this scale.
struct ImageIndex {
    std::vector<IndexEntry> entries;
    size_t dim = 0;
};

/// One entry per verified image link, recipes first then ingredients, both in
/// id order. Rebuilding yields an identical index.
inline ImageIndex build_index(const KnowledgeGraph& kg, const Embedder& embedder,
                              const std::filesystem::path& image_base = ".") {
    ImageIndex index;
    index.dim = embedder.dim();
    auto add = [&](EntityId id, const std::optional<ImageLink>& link) {
        if (!link || !link->verified) return;
        index.entries.push_back({id, *link, embedder.embed_image(image_base / link->path)});
    };
    for (const auto& r : kg.recipes()) add(r.id, r.image);
    for (const auto& i : kg.ingredients()) add(i.id, i.image);
    return index;
}

struct RetrievalHit {
    size_t entry_index = 0;
    double similarity = -1.0;
};

/// Argmax cosine over the whole index; ties break to the lowest entity id
/// (recipes order before ingredients).
inline RetrievalHit retrieve(const ImageIndex& index, std::string_view query_text,
                             const Embedder& embedder) {
    if (index.entries.empty()) throw ValidationError("retrieve: empty image index");
    EmbeddingVector q = embedder.embed_text(query_text);
    RetrievalHit best{0, cosine(q, index.entries[0].vector)};
    for (size_t i = 1; i < index.entries.size(); ++i) {
        double sim = cosine(q, index.entries[i].vector);
        if (sim > best.similarity ||
            (sim == best.similarity &&
             index.entries[i].entity < index.entries[best.entry_index].entity)) {
            best.entry_index = i;
            best.similarity = sim;
        }
    }
    return best;
}

struct GenerationResult {
    std::string image_ref;
    double latency = 0.0; // seconds
};

class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    virtual GenerationResult generate(const std::string& prompt) = 0;
};

/// Deterministic stand-in for an image generation service: writes a
/// placeholder file named by the prompt hash, with a `.caption` sidecar
/// containing the prompt, and reports a configured synthetic latency.
class MockGenerationClient final : public GenerationClient {
public:
    MockGenerationClient(std::filesystem::path out_dir, double synthetic_latency = 6.8)
        : out_dir_(std::move(out_dir)), latency_(synthetic_latency) {}

    GenerationResult generate(const std::string& prompt) override {
        if (fail_) throw TransportError("mock generation client configured to fail");
        std::string name = "gen-" + to_hex(fnv1a64(prompt)) + ".png";
        auto path = out_dir_ / name;
        write_file(path, "MMKG-PLACEHOLDER\n" + prompt + "\n");
        write_file(caption_sidecar(path), prompt);
        return {path.string(), latency_};
    }

    void set_fail(bool fail) { fail_ = fail; }

private:
    std::filesystem::path out_dir_;
    double latency_;
    bool fail_ = false;
};

enum class Strategy { Retrieved, Generated };

inline std::string_view strategy_name(Strategy s) {
    return s == Strategy::Retrieved ? "retrieved" : "generated";
}

struct RoutingDecision {
    Strategy strategy = Strategy::Retrieved;
    std::string image_ref;
    double similarity = 0.0;             // provisioned image vs. query text
    double best_retrieval_similarity = -1.0;
    double latency = 0.0;                // seconds
    std::optional<bool> hallucination_flag;
};

/// Carries the best retrieval candidate when generation fails after a
/// retrieval miss, so callers can still fall back to something.
class GenerationFailure : public Error {
public:
    GenerationFailure(const std::string& what, std::string fallback_image, double fallback_similarity)
        : Error(what + " (best retrieval fallback: " + fallback_image + ", similarity " +
                format_number(fallback_similarity) + ")"),
          fallback_image_(std::move(fallback_image)),
          fallback_similarity_(fallback_similarity) {}

    const std::string& fallback_image() const { return fallback_image_; }
    double fallback_similarity() const { return fallback_similarity_; }

private:
    std::string fallback_image_;
    double fallback_similarity_;
};

struct RouterCfg {
    /// When set, retrieval decisions report this synthetic latency instead of
    /// wall-clock time (mock mode; keeps outputs byte-reproducible).
    std::optional<double> synthetic_retrieval_latency;
    std::filesystem::path image_base = ".";
};

/// Confidence-threshold routing: retrieve when the best index similarity
/// clears tau, otherwise generate from the answer text.
inline RoutingDecision route(const std::string& /*question*/, const std::string& answer_text,
                             const ImageIndex& index, GenerationClient& gen_client,
                             const Embedder& embedder, double tau, const RouterCfg& cfg = {}) {
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("route: tau must be in (0, 1)");

    RoutingDecision d;
    auto t0 = std::chrono::steady_clock::now();
    std::optional<RetrievalHit> hit;
    if (!index.entries.empty()) hit = retrieve(index, answer_text, embedder);
    if (hit) d.best_retrieval_similarity = hit->similarity;

    if (hit && hit->similarity >= tau) {
        const auto& entry = index.entries[hit->entry_index];
        d.strategy = Strategy::Retrieved;
        d.image_ref = (cfg.image_base / entry.image.path).string();
        d.similarity = hit->similarity;
        if (cfg.synthetic_retrieval_latency) {
            d.latency = *cfg.synthetic_retrieval_latency;
        } else {
            d.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        return d;
    }

    GenerationResult gen;
    try {
        gen = gen_client.generate(answer_text);
    } catch (const Error& e) {
        std::string fallback = hit ? index.entries[hit->entry_index].image.path : "";
        throw GenerationFailure(std::string("generation failed: ") + e.what(), fallback,
                                d.best_retrieval_similarity);
    }
    d.strategy = Strategy::Generated;
    d.image_ref = gen.image_ref;
    d.similarity = cosine(embedder.embed_text(answer_text), embedder.embed_image(gen.image_ref));
    d.latency = gen.latency;
    return d;
}

struct RouteQuery {
    std::string id;
    std::string question;
    std::string answer;
};

struct ConsistencyCfg {
    const VisionQAClient* client = nullptr;
    ConsistencyThresholds thresholds;
};

struct StrategyRow {
    std::string strategy;
    double mean_similarity = 0.0;
    double mean_latency = 0.0;
    std::optional<double> hallucination_rate;
    size_t retrieved = 0;
    size_t generated = 0;
};

namespace router_detail {

enum class Mode { PureRetrieval, PureGeneration, Hybrid };

inline RoutingDecision route_mode(Mode mode, const RouteQuery& q, const ImageIndex& index,
                                  GenerationClient& gen_client, const Embedder& embedder,
                                  double tau, const RouterCfg& cfg) {
    switch (mode) {
        case Mode::Hybrid:
            return route(q.question, q.answer, index, gen_client, embedder, tau, cfg);
        case Mode::PureRetrieval: {
            auto hit = retrieve(index, q.answer, embedder);
            RoutingDecision d;
            d.strategy = Strategy::Retrieved;
            d.best_retrieval_similarity = hit.similarity;
            d.similarity = hit.similarity;
            d.image_ref = (cfg.image_base / index.entries[hit.entry_index].image.path).string();
            d.latency = cfg.synthetic_retrieval_latency.value_or(0.0);
            return d;
        }
        case Mode::PureGeneration: {
            auto gen = gen_client.generate(q.answer);
            RoutingDecision d;
            d.strategy = Strategy::Generated;
            d.image_ref = gen.image_ref;
            d.similarity =
                cosine(embedder.embed_text(q.answer), embedder.embed_image(gen.image_ref));
            d.latency = gen.latency;
            return d;
        }
    }
    throw Error("unreachable");
}

} // namespace router_detail

/// Per-query answer-consistency check of a provisioned image: ask the vision
/// client the query's own question against the image and score the reply
/// against the expected answer.
inline Verdict provisioned_verdict(const RouteQuery& q, const std::string& image_ref,
                                   const ConsistencyCfg& ccfg, const Embedder& embedder) {
    std::string reply = ccfg.client->answer(image_ref, q.question);
    if (reply.empty()) return Verdict::Hallucination;
    double f1 = token_f1(tokenize(reply), tokenize(q.answer), embedder).f1;
    return classify(f1, ccfg.thresholds);
}

/// Runs every query under pure retrieval, pure generation, and the hybrid
/// policy, reporting mean similarity, mean latency, and (when a vision client
/// is supplied) the hallucination rate per strategy.
inline std::vector<StrategyRow> strategy_report(std::span<const RouteQuery> queries,
                                                const ImageIndex& index,
                                                GenerationClient& gen_client,
                                                const Embedder& embedder, double tau,
                                                const RouterCfg& cfg = {},
                                                const ConsistencyCfg* ccfg = nullptr,
                                                std::vector<RoutingDecision>* hybrid_decisions = nullptr) {
    if (queries.empty()) throw ValidationError("strategy_report: no queries");
    if (index.entries.empty())
        throw ValidationError("strategy_report: pure retrieval needs a non-empty index");

    using router_detail::Mode;
    const std::pair<Mode, std::string> modes[] = {
        {Mode::PureRetrieval, "pure_retrieval"},
        {Mode::PureGeneration, "pure_generation"},
        {Mode::Hybrid, "hybrid"},
    };

    std::vector<StrategyRow> rows;
    for (const auto& [mode, name] : modes) {
        StrategyRow row;
        row.strategy = name;
        size_t halluc = 0;
        for (const auto& q : queries) {
            auto d = router_detail::route_mode(mode, q, index, gen_client, embedder, tau, cfg);
            row.mean_similarity += d.similarity;
            row.mean_latency += d.latency;
            if (d.strategy == Strategy::Retrieved) ++row.retrieved;
            else ++row.generated;
            if (ccfg != nullptr && ccfg->client != nullptr) {
                Verdict v = provisioned_verdict(q, d.image_ref, *ccfg, embedder);
                d.hallucination_flag = v == Verdict::Hallucination;
                if (*d.hallucination_flag) ++halluc;
            }
            if (mode == Mode::Hybrid && hybrid_decisions != nullptr)
                hybrid_decisions->push_back(std::move(d));
        }
        row.mean_similarity /= static_cast<double>(queries.size());
        row.mean_latency /= static_cast<double>(queries.size());
        if (ccfg != nullptr && ccfg->client != nullptr)
            row.hallucination_rate = static_cast<double>(halluc) / static_cast<double>(queries.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Aligned text table mirroring the report columns.
inline std::string strategy_table(const std::vector<StrategyRow>& rows) {
    std::string out = "Strategy          Cosine Sim.  Latency     Hallucination Rate\n";
    for (const auto& r : rows) {
        char buf[160];
        std::string halluc = r.hallucination_rate
                                 ? format_number(*r.hallucination_rate * 100.0) + " %"
                                 : std::string("n/a");
        std::snprintf(buf, sizeof(buf), "%-17s %-12s %-11s %s\n", r.strategy.c_str(),
                      format_number(r.mean_similarity).c_str(),
                      (format_number(r.mean_latency) + " s").c_str(), halluc.c_str());
        out += buf;
    }
    return out;
}

} // namespace mmkg
