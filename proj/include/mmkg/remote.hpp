#pragma once

// HTTP client adapters for the four remote protocols:
//   POST /embed/text  {"text": ...}            -> {"vector": [...]}
//   POST /embed/image {"path"|"bytes_b64": ..} -> {"vector": [...]}
//   POST /vqa/generate {"image": ...}          -> {"qa": [{"question","answer"}]}
//   POST /vqa/answer  {"image", "question"}    -> {"answer": ...}
//   POST /generate    {"prompt": ...}          -> {"image_path": ...}
//   POST /answer      {"question", "context"}  -> {"answer": ...}
// 4xx responses surface as ValidationError, 5xx as ProviderError, and
// connect/timeout failures as TransportError. In-flight requests are bounded
// per client and each request carries a timeout.

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "mmkg/consistency.hpp"
#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/pipeline.hpp"
#include "mmkg/router.hpp"

namespace mmkg {

namespace remote_detail {

class Gate {
public:
    explicit Gate(unsigned max_inflight) : slots_(max_inflight == 0 ? 1 : max_inflight) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return slots_ > 0; });
        --slots_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    unsigned slots_;
};

struct GateScope {
    Gate& gate;
    explicit GateScope(Gate& g) : gate(g) { gate.acquire(); }
    ~GateScope() { gate.release(); }
};

} // namespace remote_detail

struct RemoteOptions {
    unsigned max_inflight = 4;
    std::chrono::seconds timeout{30};
};

/// Shared POST-JSON plumbing for all remote clients.
class RemoteEndpoint {
public:
    RemoteEndpoint(std::string host, int port, RemoteOptions options = {})
        : host_(std::move(host)), port_(port), options_(options), gate_(options.max_inflight) {}

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        remote_detail::GateScope scope(gate_);
        httplib::Client client(host_, port_);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        client.set_write_timeout(options_.timeout);
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res)
            throw TransportError("cannot reach " + host_ + ":" + std::to_string(port_) + path +
                                 ": " + httplib::to_string(res.error()));
        if (res->status >= 500)
            throw ProviderError("provider error " + std::to_string(res->status) + " from " + path +
                                ": " + res->body);
        if (res->status >= 400)
            throw ValidationError("input rejected (" + std::to_string(res->status) + ") by " +
                                  path + ": " + res->body);
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("unparsable response from ") + path + ": " + e.what());
        }
    }

private:
    std::string host_;
    int port_;
    RemoteOptions options_;
    mutable remote_detail::Gate gate_;
};

/// SBERT/CLIP-class embedding service client. The declared dimension is
/// checked against every response; the model name is passed through.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string host, int port, size_t dim, std::string model = "",
                   RemoteOptions options = {})
        : endpoint_(std::move(host), port, options), dim_(dim), model_(std::move(model)) {}

    size_t dim() const override { return dim_; }

    EmbeddingVector embed_text(std::string_view text) const override {
        if (text.empty()) throw ValidationError("embed_text: empty text");
        nlohmann::json body{{"text", std::string(text)}};
        if (!model_.empty()) body["model"] = model_;
        return to_vector(endpoint_.post("/embed/text", body));
    }

    EmbeddingVector embed_image(const std::filesystem::path& image_ref) const override {
        nlohmann::json body{{"path", image_ref.string()}};
        if (!model_.empty()) body["model"] = model_;
        return to_vector(endpoint_.post("/embed/image", body));
    }

private:
    RemoteEndpoint endpoint_;
    size_t dim_;
    std::string model_;

    EmbeddingVector to_vector(const nlohmann::json& j) const {
        EmbeddingVector v;
        try {
            v.values = j.at("vector").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("embedding response missing vector: ") + e.what());
        }
        if (v.dim() != dim_)
            throw ProviderError("provider returned dimension " + std::to_string(v.dim()) +
                                ", expected " + std::to_string(dim_));
        v.normalize();
        return v;
    }
};

class RemoteVisionQA final : public VisionQAClient {
public:
    RemoteVisionQA(std::string host, int port, RemoteOptions options = {})
        : endpoint_(std::move(host), port, options) {}

    std::vector<VisionQAPair> generate_qa(const std::string& image_ref) const override {
        auto j = endpoint_.post("/vqa/generate", {{"image", image_ref}});
        std::vector<VisionQAPair> qa;
        try {
            for (const auto& item : j.at("qa"))
                qa.push_back({item.at("question").get<std::string>(),
                              item.at("answer").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("bad /vqa/generate response: ") + e.what());
        }
        return qa;
    }

    std::string answer(const std::string& image_ref, const std::string& question) const override {
        auto j = endpoint_.post("/vqa/answer", {{"image", image_ref}, {"question", question}});
        try {
            return j.at("answer").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("bad /vqa/answer response: ") + e.what());
        }
    }

private:
    RemoteEndpoint endpoint_;
};

/// Diffusion-service client; latency is measured wall-clock.
class RemoteGenerationClient final : public GenerationClient {
public:
    RemoteGenerationClient(std::string host, int port, RemoteOptions options = {})
        : endpoint_(std::move(host), port, options) {}

    GenerationResult generate(const std::string& prompt) override {
        auto t0 = std::chrono::steady_clock::now();
        auto j = endpoint_.post("/generate", {{"prompt", prompt}});
        GenerationResult out;
        try {
            out.image_ref = j.at("image_path").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("bad /generate response: ") + e.what());
        }
        out.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

private:
    RemoteEndpoint endpoint_;
};

/// LLM answer-service client; KG context triples travel as rendered strings.
class RemoteTextClient final : public TextAnswerClient {
public:
    RemoteTextClient(const KnowledgeGraph& kg, std::string host, int port,
                     RemoteOptions options = {})
        : kg_(kg), endpoint_(std::move(host), port, options) {}

    std::string answer(const std::string& question,
                       std::span<const Triple> context_triples) const override {
        std::vector<std::string> context;
        for (const auto& t : context_triples)
            context.push_back("<" + kg_.recipe(t.subject).title + "> hasIngredient <" +
                              kg_.ingredient(t.object).canonical_name + ">");
        auto j = endpoint_.post("/answer", {{"question", question}, {"context", context}});
        try {
            return j.at("answer").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("bad /answer response: ") + e.what());
        }
    }

private:
    const KnowledgeGraph& kg_;
    RemoteEndpoint endpoint_;
};

} // namespace mmkg
