#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/textmetrics.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

struct VisionQAPair {
    std::string question;
    std::string answer;
};

/// Vision-QA client: generates image-grounded QA pairs from a ground-truth
/// image and answers arbitrary questions about an image.
class VisionQAClient {
public:
    virtual ~VisionQAClient() = default;
    virtual std::vector<VisionQAPair> generate_qa(const std::string& image_ref) const = 0;
    virtual std::string answer(const std::string& image_ref, const std::string& question) const = 0;
};

/// Fixture-keyed mock client. JSON layout:
///
///   {"images": {"<image_ref>": {
///       "qa": [{"question": "...", "answer": "..."}],
///       "answers": {"<question>": "<answer>"}}}}
///
/// For an image with no fixture entry, answers fall back to the `.caption`
/// sidecar when one exists (covers mock-generated images, whose caption is the
/// generation prompt); otherwise the question is unanswered ("").
class MockVisionQA final : public VisionQAClient {
public:
    static MockVisionQA load(const std::filesystem::path& path) {
        MockVisionQA client;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad vision-QA fixture: ") + e.what(), 0);
        }
        for (const auto& [ref, entry] : j.at("images").items()) {
            ImageEntry ie;
            if (entry.contains("qa"))
                for (const auto& qa : entry.at("qa"))
                    ie.qa.push_back({qa.at("question").get<std::string>(),
                                     qa.at("answer").get<std::string>()});
            if (entry.contains("answers"))
                for (const auto& [q, a] : entry.at("answers").items())
                    ie.answers[q] = a.get<std::string>();
            client.images_[ref] = std::move(ie);
        }
        return client;
    }

    std::vector<VisionQAPair> generate_qa(const std::string& image_ref) const override {
        auto it = images_.find(image_ref);
        if (it != images_.end()) return it->second.qa;
        auto caption = read_caption(image_ref);
        if (caption) return {{"What is shown in this image?", *caption}};
        return {};
    }

    std::string answer(const std::string& image_ref, const std::string& question) const override {
        auto it = images_.find(image_ref);
        if (it != images_.end()) {
            auto ans = it->second.answers.find(question);
            if (ans != it->second.answers.end()) return ans->second;
        }
        auto caption = read_caption(image_ref);
        return caption.value_or("");
    }

private:
    struct ImageEntry {
        std::vector<VisionQAPair> qa;
        std::map<std::string, std::string> answers;
    };
    std::map<std::string, ImageEntry> images_;

    static std::optional<std::string> read_caption(const std::string& image_ref) {
        auto sidecar = caption_sidecar(image_ref);
        if (!std::filesystem::exists(sidecar)) return std::nullopt;
        return trim(read_file(sidecar));
    }
};

enum class Verdict { Match, PartialMatch, Hallucination };

inline std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Match: return "match";
        case Verdict::PartialMatch: return "partial_match";
        case Verdict::Hallucination: return "hallucination";
    }
    return "";
}

struct ConsistencyScores {
    double token_f1 = 0.0;
    double rouge_l_f1 = 0.0;
    double bleu1 = 0.0;
};

struct ConsistencyReport {
    std::string pair_id;
    std::optional<bool> mismatch;  // embedding-cosine check, when it ran
    std::optional<double> cosine;
    Verdict verdict = Verdict::Hallucination;
    ConsistencyScores scores;      // means over answered questions
    size_t questions = 0;
    size_t unanswered = 0;
};

struct ConsistencyThresholds {
    double match_threshold = 0.85;  // mean token F1 at or above: Match
    double halluc_threshold = 0.60; // mean token F1 below: Hallucination

    void validate() const {
        if (!(halluc_threshold < match_threshold))
            throw ValidationError("hallucination threshold must be below match threshold");
        if (halluc_threshold < 0.0 || match_threshold > 1.0)
            throw ValidationError("verdict thresholds must lie in [0, 1]");
    }
};

/// Maps a mean token-F1 score to a verdict. The two thresholds partition
/// [0, 1]: every score lands in exactly one verdict.
inline Verdict classify(double mean_token_f1, const ConsistencyThresholds& t) {
    if (mean_token_f1 >= t.match_threshold) return Verdict::Match;
    if (mean_token_f1 < t.halluc_threshold) return Verdict::Hallucination;
    return Verdict::PartialMatch;
}

struct MismatchResult {
    double cosine = 0.0;
    bool mismatch = false;
};

/// Image-text mismatch: cosine between the text and image embeddings below
/// the threshold. Threshold 0 can never flag a mismatch of non-negative
/// embeddings; thresholds at or above 1 are rejected.
inline MismatchResult detect_mismatch(std::string_view text,
                                      const std::filesystem::path& image_ref,
                                      const Embedder& embedder, double threshold) {
    if (!(threshold >= 0.0 && threshold < 1.0))
        throw ValidationError("detect_mismatch: threshold must be in [0, 1)");
    double c = cosine(embedder.embed_text(text), embedder.embed_image(image_ref));
    return {c, c < threshold};
}

struct TextImagePair {
    std::string id;
    std::string text;
    std::string image;
};

struct MismatchSummary {
    size_t total = 0;
    size_t mismatches = 0;
    double rate = 0.0;
};

inline MismatchSummary mismatch_rate(std::span<const TextImagePair> pairs,
                                     const Embedder& embedder, double threshold,
                                     std::vector<ConsistencyReport>* reports = nullptr,
                                     unsigned jobs = 1) {
    if (pairs.empty()) throw ValidationError("mismatch_rate: no pairs given");
    std::vector<MismatchResult> results(pairs.size());
    parallel_for(pairs.size(), jobs, [&](size_t i) {
        results[i] = detect_mismatch(pairs[i].text, pairs[i].image, embedder, threshold);
    });
    MismatchSummary s;
    s.total = pairs.size();
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (results[i].mismatch) ++s.mismatches;
        if (reports != nullptr) {
            ConsistencyReport r;
            r.pair_id = pairs[i].id;
            r.cosine = results[i].cosine;
            r.mismatch = results[i].mismatch;
            reports->push_back(std::move(r));
        }
    }
    s.rate = static_cast<double>(s.mismatches) / static_cast<double>(s.total);
    return s;
}

struct MetricsCfg {
    const Embedder* embedder = nullptr; // token vectors for token_f1
    ConsistencyThresholds thresholds;
};

/// QA-consistency check of a generated image against its ground truth: the
/// client derives questions from the ground-truth image, answers them on the
/// generated image, and the answers are scored against the ground-truth
/// answers. The verdict comes from the mean token F1 over answered questions.
inline ConsistencyReport hallucination_check(const std::string& gt_image,
                                             const std::string& gen_image,
                                             const VisionQAClient& client,
                                             const MetricsCfg& cfg,
                                             const std::string& pair_id = "") {
    if (cfg.embedder == nullptr)
        throw ValidationError("hallucination_check: metrics config needs an embedder");
    cfg.thresholds.validate();

    auto qa = client.generate_qa(gt_image);
    if (qa.empty())
        throw ValidationError("hallucination_check: client produced no questions for " + gt_image);

    ConsistencyReport report;
    report.pair_id = pair_id;
    report.questions = qa.size();
    size_t answered = 0;
    for (const auto& item : qa) {
        std::string generated_answer;
        try {
            generated_answer = client.answer(gen_image, item.question);
        } catch (const TransportError&) {
            ++report.unanswered;
            continue;
        }
        if (generated_answer.empty()) {
            ++report.unanswered;
            continue;
        }
        auto cand = tokenize(generated_answer);
        auto ref = tokenize(item.answer);
        report.scores.token_f1 += token_f1(cand, ref, *cfg.embedder).f1;
        report.scores.rouge_l_f1 += rouge_l(cand, ref).f1;
        report.scores.bleu1 += bleu(cand, ref, 1);
        ++answered;
    }
    if (answered == 0)
        throw ProviderError("hallucination_check: no question could be answered for " + gen_image);
    report.scores.token_f1 /= static_cast<double>(answered);
    report.scores.rouge_l_f1 /= static_cast<double>(answered);
    report.scores.bleu1 /= static_cast<double>(answered);
    report.verdict = classify(report.scores.token_f1, cfg.thresholds);
    return report;
}

struct HallucinationCase {
    std::string pair_id;
    std::string gt_image;
    std::string gen_image;
};

struct HallucinationSummary {
    size_t total = 0;
    size_t hallucinations = 0;
    double rate = 0.0;
    ConsistencyScores mean_scores;
};

inline HallucinationSummary hallucination_rate(std::span<const HallucinationCase> dataset,
                                               const VisionQAClient& client,
                                               const MetricsCfg& cfg,
                                               std::vector<ConsistencyReport>* reports = nullptr) {
    if (dataset.empty()) throw ValidationError("hallucination_rate: empty dataset");
    HallucinationSummary s;
    s.total = dataset.size();
    std::vector<ConsistencyReport> local;
    for (const auto& c : dataset)
        local.push_back(hallucination_check(c.gt_image, c.gen_image, client, cfg, c.pair_id));
    std::sort(local.begin(), local.end(),
              [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
    for (const auto& r : local) {
        if (r.verdict == Verdict::Hallucination) ++s.hallucinations;
        s.mean_scores.token_f1 += r.scores.token_f1;
        s.mean_scores.rouge_l_f1 += r.scores.rouge_l_f1;
        s.mean_scores.bleu1 += r.scores.bleu1;
    }
    s.mean_scores.token_f1 /= static_cast<double>(s.total);
    s.mean_scores.rouge_l_f1 /= static_cast<double>(s.total);
    s.mean_scores.bleu1 /= static_cast<double>(s.total);
    s.rate = static_cast<double>(s.hallucinations) / static_cast<double>(s.total);
    if (reports != nullptr) *reports = std::move(local);
    return s;
}

// ---- JSON Lines report serialization ----------------------------------------

inline nlohmann::json consistency_report_to_json(const ConsistencyReport& r) {
    nlohmann::json j;
    j["pair_id"] = r.pair_id;
    if (r.mismatch) j["mismatch"] = *r.mismatch;
    if (r.cosine) j["cosine"] = *r.cosine;
    if (r.questions > 0) {
        j["verdict"] = std::string(verdict_name(r.verdict));
        j["scores"] = {{"token_f1", r.scores.token_f1},
                       {"rouge_l_f1", r.scores.rouge_l_f1},
                       {"bleu1", r.scores.bleu1}};
        j["questions"] = r.questions;
        j["unanswered"] = r.unanswered;
    }
    return j;
}

} // namespace mmkg
