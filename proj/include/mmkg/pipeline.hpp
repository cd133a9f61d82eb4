#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/kg.hpp"
#include "mmkg/qa.hpp"
#include "mmkg/router.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

/// Text answer generation behind the first stage of the question -> text ->
/// image flow.
class TextAnswerClient {
public:
    virtual ~TextAnswerClient() = default;
    virtual std::string answer(const std::string& question,
                               std::span<const Triple> context_triples) const = 0;
};

/// Bundled mock: answers by matching the question against the loaded
/// templates (case-insensitive, slots match any text) and executing the first
/// matching template's answer plan against the KG. Faithful by construction.
class KgTemplateTextClient final : public TextAnswerClient {
public:
    KgTemplateTextClient(const KnowledgeGraph& kg, std::vector<Template> templates,
                         const SubstitutionTable* subs = nullptr)
        : kg_(kg), templates_(std::move(templates)), subs_(subs) {}

    std::string answer(const std::string& question,
                       std::span<const Triple> /*context_triples*/) const override {
        for (const auto& tmpl : templates_) {
            auto binding = match_question(tmpl, question);
            if (!binding) continue;
            auto result = execute_plan(tmpl, *binding, kg_);
            if (result) return *result;
        }
        return "";
    }

    /// Tries to bind the question text to the template's pattern: literal
    /// segments must match case-insensitively, slot segments must resolve to a
    /// KG entity of the declared kind (alternatives resolve via the
    /// substitution table).
    std::optional<Binding> match_question(const Template& tmpl, const std::string& question) const {
        // split the pattern into literal / slot segments
        std::vector<std::pair<bool, std::string>> segments; // {is_slot, text}
        const std::string& p = tmpl.pattern;
        size_t pos = 0;
        while (pos < p.size()) {
            size_t open = p.find('{', pos);
            if (open == std::string::npos) {
                segments.push_back({false, p.substr(pos)});
                break;
            }
            if (open > pos) segments.push_back({false, p.substr(pos, open - pos)});
            size_t close = p.find('}', open);
            if (close == std::string::npos) return std::nullopt;
            segments.push_back({true, p.substr(open + 1, close - open - 1)});
            pos = close + 1;
        }

        std::string q = to_lower(question);
        Binding binding;
        size_t qpos = 0;
        for (size_t s = 0; s < segments.size(); ++s) {
            const auto& [is_slot, text] = segments[s];
            if (!is_slot) {
                std::string lit = to_lower(text);
                if (q.compare(qpos, lit.size(), lit) != 0) return std::nullopt;
                qpos += lit.size();
                continue;
            }
            // slot: capture up to the next literal segment (or end)
            std::string captured;
            if (s + 1 < segments.size() && !segments[s + 1].first) {
                std::string next = to_lower(segments[s + 1].second);
                size_t at = q.find(next, qpos);
                if (at == std::string::npos) return std::nullopt;
                captured = q.substr(qpos, at - qpos);
                qpos = at;
            } else {
                captured = q.substr(qpos);
                qpos = q.size();
            }
            auto id = resolve_slot(tmpl, text, trim(captured));
            if (!id) return std::nullopt;
            binding[text] = *id;
        }
        if (qpos != q.size()) return std::nullopt;
        // slots that never occur in the pattern cannot be bound from text
        if (binding.size() != tmpl.slot_kinds.size()) return std::nullopt;
        return binding;
    }

private:
    const KnowledgeGraph& kg_;
    std::vector<Template> templates_;
    const SubstitutionTable* subs_;

    std::optional<EntityId> resolve_slot(const Template& tmpl, const std::string& slot,
                                         const std::string& value) const {
        auto it = tmpl.slot_kinds.find(slot);
        if (it == tmpl.slot_kinds.end()) return std::nullopt;
        if (value.empty()) return std::nullopt;
        switch (it->second) {
            case SlotKind::Recipe:
                return kg_.find_recipe(value);
            case SlotKind::Ingredient:
            case SlotKind::Alternative:
                return kg_.find_ingredient(value);
        }
        return std::nullopt;
    }
};

struct MultimodalAnswer {
    std::string question;
    std::string text_answer;
    std::string image_ref;
    RoutingDecision routing;
    std::string provenance; // client identifiers, e.g. "text=kg-mock image=mock"
};

/// Longest case-insensitive entity-name matches inside the question, used to
/// assemble the KG context passed to the text client.
inline std::vector<EntityId> link_entities(const std::string& question, const KnowledgeGraph& kg) {
    std::string q = to_lower(question);
    std::vector<std::pair<std::string, EntityId>> names;
    for (const auto& r : kg.recipes()) names.push_back({to_lower(r.title), r.id});
    for (const auto& i : kg.ingredients()) names.push_back({i.canonical_name, i.id});
    std::sort(names.begin(), names.end(), [](const auto& a, const auto& b) {
        if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
        return a.first < b.first;
    });

    std::vector<bool> consumed(q.size(), false);
    std::vector<EntityId> linked;
    for (const auto& [name, id] : names) {
        size_t at = q.find(name);
        while (at != std::string::npos) {
            bool free = true;
            for (size_t i = at; i < at + name.size(); ++i) free = free && !consumed[i];
            if (free) {
                for (size_t i = at; i < at + name.size(); ++i) consumed[i] = true;
                linked.push_back(id);
                break;
            }
            at = q.find(name, at + 1);
        }
    }
    std::sort(linked.begin(), linked.end());
    return linked;
}

inline std::vector<Triple> context_triples(std::span<const EntityId> entities,
                                           const KnowledgeGraph& kg) {
    std::vector<Triple> context;
    for (EntityId id : entities) {
        if (id.kind == EntityKind::Recipe) {
            for (const auto& ing : kg.ingredients_of(id))
                context.push_back({id, Predicate::HasIngredient, ing.id});
        } else {
            for (const auto& rec : kg.recipes_with(id))
                context.push_back({rec.id, Predicate::HasIngredient, id});
        }
    }
    std::sort(context.begin(), context.end());
    context.erase(std::unique(context.begin(), context.end()), context.end());
    return context;
}

struct PipelineClients {
    const TextAnswerClient* text = nullptr;
    GenerationClient* generation = nullptr;
    const Embedder* embedder = nullptr;
    const ImageIndex* index = nullptr;
};

struct PipelineCfg {
    double tau = 0.5;
    RouterCfg router;
    std::string provenance = "text=kg-mock image=mock";
};

/// Fig-style unified flow: question -> KG-contextualized text answer ->
/// image provisioning with the text answer as the prompt.
inline MultimodalAnswer answer_question(const std::string& question, const KnowledgeGraph& kg,
                                        const PipelineClients& clients, const PipelineCfg& cfg) {
    if (trim(question).empty()) throw ValidationError("answer_question: empty question");
    if (clients.text == nullptr || clients.generation == nullptr || clients.embedder == nullptr ||
        clients.index == nullptr)
        throw ValidationError("answer_question: text, generation, embedder, and index clients required");

    auto entities = link_entities(question, kg);
    auto context = context_triples(entities, kg);

    std::string text_answer;
    try {
        text_answer = clients.text->answer(question, context);
    } catch (const Error& e) {
        throw ProviderError(std::string("text stage failed: ") + e.what());
    }
    if (text_answer.empty())
        throw ProviderError("text stage produced no answer for: " + question);

    MultimodalAnswer out;
    out.question = question;
    out.text_answer = text_answer;
    try {
        out.routing = route(question, text_answer, *clients.index, *clients.generation,
                            *clients.embedder, cfg.tau, cfg.router);
    } catch (const GenerationFailure&) {
        throw;
    } catch (const Error& e) {
        throw ProviderError(std::string("image stage failed: ") + e.what());
    }
    out.image_ref = out.routing.image_ref;
    out.provenance = cfg.provenance;
    return out;
}

} // namespace mmkg
