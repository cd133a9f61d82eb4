// Independent brute-force reference implementations used to check the library.
// Everything here is written from the metric definitions directly and must not
// call the implementation paths it verifies.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mmkg/kg.hpp"
#include "mmkg/qa.hpp"
#include "mmkg/util.hpp"

namespace oracle {

using Tokens = std::vector<std::string>;

// ---- n-gram metrics ---------------------------------------------------------

inline std::map<std::string, int> ngrams_joined(const Tokens& t, int n) {
    std::map<std::string, int> out;
    for (int i = 0; i + n <= static_cast<int>(t.size()); ++i) {
        std::string key;
        for (int j = 0; j < n; ++j) key += t[static_cast<size_t>(i + j)] + "\x1f";
        out[key] += 1;
    }
    return out;
}

inline double bleu_bruteforce(const Tokens& cand, const Tokens& ref, int n) {
    if (cand.empty()) return 0.0;
    double product = 1.0;
    for (int order = 1; order <= n; ++order) {
        auto c = ngrams_joined(cand, order);
        auto r = ngrams_joined(ref, order);
        double total = 0.0, hit = 0.0;
        for (const auto& [gram, count] : c) {
            total += count;
            auto it = r.find(gram);
            hit += it == r.end() ? 0 : std::min(count, it->second);
        }
        if (total == 0.0 || hit == 0.0) return 0.0;
        product *= hit / total;
    }
    double prec = std::pow(product, 1.0 / n);
    double c_len = static_cast<double>(cand.size());
    double r_len = static_cast<double>(ref.size());
    double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
    return bp * prec;
}

struct Prf {
    double p = 0.0, r = 0.0, f1 = 0.0;
};

inline Prf prf(double p, double r) {
    Prf out{p, r, 0.0};
    if (p + r > 0.0) out.f1 = 2 * p * r / (p + r);
    return out;
}

inline Prf rouge_n_bruteforce(const Tokens& cand, const Tokens& ref, int n) {
    auto c = ngrams_joined(cand, n);
    auto r = ngrams_joined(ref, n);
    double ct = 0.0, rt = 0.0, hit = 0.0;
    for (const auto& [_, count] : c) ct += count;
    for (const auto& [_, count] : r) rt += count;
    for (const auto& [gram, count] : c) {
        auto it = r.find(gram);
        if (it != r.end()) hit += std::min(count, it->second);
    }
    return prf(ct > 0 ? hit / ct : 0.0, rt > 0 ? hit / rt : 0.0);
}

// plain quadratic LCS table, no rolling rows
inline int lcs_bruteforce(const Tokens& a, const Tokens& b) {
    std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (size_t i = 1; i <= a.size(); ++i)
        for (size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                            : std::max(dp[i - 1][j], dp[i][j - 1]);
    return dp[a.size()][b.size()];
}

inline Prf rouge_l_bruteforce(const Tokens& cand, const Tokens& ref) {
    if (cand.empty() || ref.empty()) return {};
    double l = lcs_bruteforce(cand, ref);
    return prf(l / static_cast<double>(cand.size()), l / static_cast<double>(ref.size()));
}

/// Greedy token matching over an explicit m x n cosine matrix.
template <typename EmbedFn>
inline Prf token_f1_bruteforce(const Tokens& cand, const Tokens& ref, EmbedFn cos_fn) {
    if (cand.empty() || ref.empty()) return {};
    double psum = 0.0;
    for (const auto& c : cand) {
        double best = -1.0;
        for (const auto& r : ref) best = std::max(best, cos_fn(c, r));
        psum += best;
    }
    double rsum = 0.0;
    for (const auto& r : ref) {
        double best = -1.0;
        for (const auto& c : cand) best = std::max(best, cos_fn(r, c));
        rsum += best;
    }
    return prf(psum / static_cast<double>(cand.size()), rsum / static_cast<double>(ref.size()));
}

// ---- cluster validity indices ----------------------------------------------

using Matrix = std::vector<std::vector<double>>;

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double silhouette_bruteforce(const Matrix& pts, const std::vector<int>& labels) {
    const size_t n = pts.size();
    int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> size(static_cast<size_t>(k), 0);
    for (int l : labels) size[static_cast<size_t>(l)]++;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        int li = labels[i];
        if (size[static_cast<size_t>(li)] == 1) continue;
        std::vector<double> sums(static_cast<size_t>(k), 0.0);
        for (size_t j = 0; j < n; ++j)
            if (j != i) sums[static_cast<size_t>(labels[j])] += euclid(pts[i], pts[j]);
        double a = sums[static_cast<size_t>(li)] / (size[static_cast<size_t>(li)] - 1);
        double b = std::numeric_limits<double>::max();
        for (int c = 0; c < k; ++c)
            if (c != li && size[static_cast<size_t>(c)] > 0)
                b = std::min(b, sums[static_cast<size_t>(c)] / size[static_cast<size_t>(c)]);
        if (std::max(a, b) > 0) total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

inline double davies_bouldin_bruteforce(const Matrix& pts, const std::vector<int>& labels) {
    int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> size(static_cast<size_t>(k), 0);
    for (int l : labels) size[static_cast<size_t>(l)]++;
    Matrix cent(static_cast<size_t>(k), std::vector<double>(pts[0].size(), 0.0));
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t d = 0; d < pts[i].size(); ++d)
            cent[static_cast<size_t>(labels[i])][d] += pts[i][d];
    std::vector<int> live;
    for (int c = 0; c < k; ++c) {
        if (size[static_cast<size_t>(c)] == 0) continue;
        for (double& v : cent[static_cast<size_t>(c)]) v /= size[static_cast<size_t>(c)];
        live.push_back(c);
    }
    std::vector<double> disp(static_cast<size_t>(k), 0.0);
    for (size_t i = 0; i < pts.size(); ++i)
        disp[static_cast<size_t>(labels[i])] +=
            euclid(pts[i], cent[static_cast<size_t>(labels[i])]);
    for (int c : live) disp[static_cast<size_t>(c)] /= size[static_cast<size_t>(c)];
    double total = 0.0;
    for (int a : live) {
        double worst = 0.0;
        for (int b : live) {
            if (a == b) continue;
            double d = euclid(cent[static_cast<size_t>(a)], cent[static_cast<size_t>(b)]);
            if (d == 0.0) continue;
            worst = std::max(worst, (disp[static_cast<size_t>(a)] + disp[static_cast<size_t>(b)]) / d);
        }
        total += worst;
    }
    return total / static_cast<double>(live.size());
}

inline double dunn_bruteforce(const Matrix& pts, const std::vector<int>& labels) {
    double min_between = std::numeric_limits<double>::max();
    double max_diam = 0.0;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j) {
            double d = euclid(pts[i], pts[j]);
            if (labels[i] == labels[j]) max_diam = std::max(max_diam, d);
            else min_between = std::min(min_between, d);
        }
    return min_between / max_diam;
}

// ---- KG traversal oracle ----------------------------------------------------

/// Everything below re-derives template answers from raw triple scans and
/// entity records only, never through the graph's query methods.

inline std::vector<std::string> scan_ingredient_names(const mmkg::KnowledgeGraph& kg,
                                                      mmkg::EntityId recipe) {
    std::vector<std::string> names;
    for (const auto& t : kg.triples())
        if (t.subject == recipe) names.push_back(kg.ingredients()[t.object.local].canonical_name);
    std::sort(names.begin(), names.end());
    return names;
}

inline std::vector<std::string> scan_recipe_titles(const mmkg::KnowledgeGraph& kg,
                                                   mmkg::EntityId ingredient) {
    std::vector<std::pair<std::string, std::string>> keyed;
    for (const auto& t : kg.triples())
        if (t.object == ingredient) {
            const auto& title = kg.recipes()[t.subject.local].title;
            keyed.push_back({mmkg::to_lower(title), title});
        }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::string> titles;
    for (auto& [_, t] : keyed) titles.push_back(t);
    return titles;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (const auto& s : v) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

inline std::string render_value(double v, mmkg::Nutrient n) {
    return mmkg::format_number(v) + (n == mmkg::Nutrient::Calories ? " kcal" : " g");
}

inline std::string render_all(const mmkg::NutritionFacts& f) {
    return mmkg::format_number(f.calories) + " kcal, " + mmkg::format_number(f.fat) + " g fat, " +
           mmkg::format_number(f.protein) + " g protein, " +
           mmkg::format_number(f.carbohydrates) + " g carbohydrates";
}

/// Re-derives the expected answer for a template-generated pair from the
/// template id's documented semantics, the bound entities, and raw scans.
/// Returns empty when the pair should not exist.
inline std::string rederive_answer(const mmkg::KnowledgeGraph& kg, const mmkg::Template& tmpl,
                                   const std::map<std::string, mmkg::EntityId>& binding) {
    using mmkg::EntityKind;
    using mmkg::Nutrient;
    const auto& plan = tmpl.plan;
    auto slot = [&](size_t i) { return binding.at(plan.slot_args[i]); };

    switch (plan.kind) {
        case mmkg::PlanKind::Ingredients:
            return join(scan_ingredient_names(kg, slot(0)), ", ");
        case mmkg::PlanKind::Attr: {
            const auto& ing = kg.ingredients()[slot(0).local];
            if (!ing.nutrition) return "";
            if (plan.all_nutrients) return render_all(*ing.nutrition);
            return render_value(nutrient_value(*ing.nutrition, *plan.nutrient), *plan.nutrient);
        }
        case mmkg::PlanKind::Instructions:
            return kg.recipes()[slot(0).local].instructions;
        case mmkg::PlanKind::DishTitle: {
            const auto& r = kg.recipes()[slot(0).local];
            return r.image ? r.title : "";
        }
        case mmkg::PlanKind::RecipesWith:
            return join(scan_recipe_titles(kg, slot(0)), ", ");
        case mmkg::PlanKind::CountIngredients: {
            auto names = scan_ingredient_names(kg, slot(0));
            return names.empty() ? "" : std::to_string(names.size());
        }
        case mmkg::PlanKind::Exceeding: {
            std::vector<std::string> names;
            for (const auto& ing : kg.ingredients())
                if (ing.nutrition &&
                    nutrient_value(*ing.nutrition, *plan.nutrient) > plan.threshold)
                    names.push_back(ing.canonical_name);
            std::sort(names.begin(), names.end());
            return join(names, ", ");
        }
        case mmkg::PlanKind::IngredientsAttrs: {
            auto names = scan_ingredient_names(kg, slot(0));
            std::vector<std::string> parts;
            for (const auto& name : names) {
                const mmkg::IngredientEntity* ing = nullptr;
                for (const auto& i : kg.ingredients())
                    if (i.canonical_name == name) ing = &i;
                if (!ing->nutrition) parts.push_back(name);
                else if (plan.all_nutrients)
                    parts.push_back(name + " (" + render_all(*ing->nutrition) + ")");
                else
                    parts.push_back(
                        name + " (" +
                        render_value(nutrient_value(*ing->nutrition, *plan.nutrient),
                                     *plan.nutrient) +
                        " " + std::string(nutrient_name(*plan.nutrient)) + ")");
            }
            return join(parts, "; ");
        }
        case mmkg::PlanKind::RecipesWithBoth: {
            auto a = scan_recipe_titles(kg, slot(0));
            auto b = scan_recipe_titles(kg, slot(1));
            std::vector<std::string> both;
            for (const auto& t : a)
                if (std::find(b.begin(), b.end(), t) != b.end()) both.push_back(t);
            return join(both, ", ");
        }
        case mmkg::PlanKind::SubstituteAttrs: {
            bool in_recipe = false;
            for (const auto& t : kg.triples())
                if (t.subject == slot(0) && t.object == slot(1)) in_recipe = true;
            if (!in_recipe) return "";
            const auto& ing = kg.ingredients()[slot(1).local];
            const auto& alt = kg.ingredients()[slot(2).local];
            if (!ing.nutrition || !alt.nutrition) return "";
            Nutrient n = *plan.nutrient;
            double vi = nutrient_value(*ing.nutrition, n);
            double va = nutrient_value(*alt.nutrition, n);
            std::string unit(mmkg::nutrient_unit(n));
            return "substituting " + ing.canonical_name + " (" + render_value(vi, n) + ") with " +
                   alt.canonical_name + " (" + render_value(va, n) + ") changes " +
                   std::string(mmkg::nutrient_name(n)) + " by " + mmkg::format_number(va - vi) +
                   " " + unit;
        }
        case mmkg::PlanKind::CommonIngredients: {
            auto a = scan_ingredient_names(kg, slot(0));
            auto b = scan_ingredient_names(kg, slot(1));
            std::vector<std::string> both;
            for (const auto& n : a)
                if (std::find(b.begin(), b.end(), n) != b.end()) both.push_back(n);
            return join(both, ", ");
        }
        case mmkg::PlanKind::PartnerIngredients: {
            std::set<std::string> partners;
            for (const auto& t1 : kg.triples())
                if (t1.object == slot(0))
                    for (const auto& t2 : kg.triples())
                        if (t2.subject == t1.subject && t2.object != slot(0))
                            partners.insert(kg.ingredients()[t2.object.local].canonical_name);
            return join({partners.begin(), partners.end()}, ", ");
        }
        case mmkg::PlanKind::RecipesSharing: {
            std::map<std::string, std::string> titles;
            for (const auto& t1 : kg.triples())
                if (t1.subject == slot(0))
                    for (const auto& t2 : kg.triples())
                        if (t2.object == t1.object && t2.subject != slot(0)) {
                            const auto& title = kg.recipes()[t2.subject.local].title;
                            titles[mmkg::to_lower(title)] = title;
                        }
            std::vector<std::string> out;
            for (auto& [_, t] : titles) out.push_back(t);
            return join(out, ", ");
        }
        case mmkg::PlanKind::RecipesIngredients: {
            auto titles = scan_recipe_titles(kg, slot(0));
            std::vector<std::string> parts;
            for (const auto& title : titles) {
                const mmkg::RecipeEntity* rec = nullptr;
                for (const auto& r : kg.recipes())
                    if (r.title == title) rec = &r;
                std::vector<std::string> others;
                for (const auto& n : scan_ingredient_names(kg, rec->id))
                    if (n != kg.ingredients()[slot(0).local].canonical_name) others.push_back(n);
                parts.push_back(others.empty() ? title : title + " (with " + join(others, ", ") + ")");
            }
            return join(parts, "; ");
        }
    }
    return "";
}

/// Matches a question against a template pattern, capturing slot values.
/// Literal segments compare case-insensitively; each slot captures up to the
/// next literal.
inline bool match_pattern(const std::string& pattern, const std::string& question,
                          std::map<std::string, std::string>& captures) {
    std::string q = mmkg::to_lower(question);
    size_t ppos = 0, qpos = 0;
    while (ppos < pattern.size()) {
        size_t open = pattern.find('{', ppos);
        std::string literal = mmkg::to_lower(
            pattern.substr(ppos, open == std::string::npos ? std::string::npos : open - ppos));
        if (!literal.empty()) {
            if (q.compare(qpos, literal.size(), literal) != 0) return false;
            qpos += literal.size();
        }
        if (open == std::string::npos) {
            ppos = pattern.size();
            break;
        }
        size_t close = pattern.find('}', open);
        std::string slot = pattern.substr(open + 1, close - open - 1);
        ppos = close + 1;
        size_t next_open = pattern.find('{', ppos);
        std::string next_literal = mmkg::to_lower(pattern.substr(
            ppos, next_open == std::string::npos ? std::string::npos : next_open - ppos));
        size_t end;
        if (next_literal.empty()) {
            end = q.size();
        } else {
            end = q.find(next_literal, qpos);
            if (end == std::string::npos) return false;
        }
        captures[slot] = q.substr(qpos, end - qpos);
        qpos = end;
    }
    return qpos == q.size();
}

/// Rebuilds the slot binding of a template-generated pair from its question
/// text; slots absent from the pattern fall back to the pair's entity list.
/// Returns false when the binding cannot be reconstructed unambiguously.
inline bool recover_binding(const mmkg::Template& tmpl, const mmkg::QAPair& pair,
                            const mmkg::KnowledgeGraph& kg,
                            std::map<std::string, mmkg::EntityId>& binding) {
    using mmkg::EntityKind;
    std::map<std::string, std::string> captures;
    if (!match_pattern(tmpl.pattern, pair.question, captures)) return false;

    auto find_recipe = [&](const std::string& name) -> const mmkg::RecipeEntity* {
        for (const auto& r : kg.recipes())
            if (mmkg::to_lower(r.title) == name) return &r;
        return nullptr;
    };
    auto find_ingredient = [&](const std::string& name) -> const mmkg::IngredientEntity* {
        for (const auto& i : kg.ingredients())
            if (i.canonical_name == name) return &i;
        return nullptr;
    };

    for (const auto& [slot, kind] : tmpl.slot_kinds) {
        auto cap = captures.find(slot);
        if (cap != captures.end()) {
            if (kind == mmkg::SlotKind::Recipe) {
                auto* r = find_recipe(cap->second);
                if (!r) return false;
                binding[slot] = r->id;
            } else {
                auto* i = find_ingredient(cap->second);
                if (!i) return false;
                binding[slot] = i->id;
            }
            continue;
        }
        // slot not present in the pattern: take the unique unused entity of
        // the right kind from the pair's provenance
        EntityKind want = kind == mmkg::SlotKind::Recipe ? EntityKind::Recipe
                                                         : EntityKind::Ingredient;
        const mmkg::EntityId* found = nullptr;
        for (const auto& id : pair.entities) {
            if (id.kind != want) continue;
            bool used = false;
            for (const auto& [_, bound] : binding) used = used || bound == id;
            if (used) continue;
            if (found != nullptr) return false; // ambiguous
            found = &id;
        }
        if (found == nullptr) return false;
        binding[slot] = *found;
    }
    return binding.size() == tmpl.slot_kinds.size();
}

} // namespace oracle
