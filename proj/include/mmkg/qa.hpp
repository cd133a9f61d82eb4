#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmkg/errors.hpp"
#include "mmkg/kg.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

enum class Hop { One, Two };

inline std::string_view hop_name(Hop h) { return h == Hop::One ? "one" : "two"; }

inline std::optional<Hop> parse_hop(std::string_view s) {
    if (s == "one") return Hop::One;
    if (s == "two") return Hop::Two;
    return std::nullopt;
}

enum class SlotKind { Recipe, Ingredient, Alternative };

enum class PlanKind {
    Ingredients,        // recipe -> ingredient list
    Attr,               // ingredient -> nutrient value(s)
    Instructions,       // recipe -> instructions text
    DishTitle,          // recipe image -> title (visual recognition)
    RecipesWith,        // ingredient -> recipe list
    CountIngredients,   // recipe -> ingredient count
    Exceeding,          // nutrient threshold scan (slotless)
    IngredientsAttrs,   // recipe -> ingredients -> nutrition
    RecipesWithBoth,    // ingredient pair -> recipe intersection
    SubstituteAttrs,    // recipe ingredient + alternative -> nutrient change
    CommonIngredients,  // recipe pair -> ingredient intersection
    PartnerIngredients, // ingredient -> recipes -> other ingredients
    RecipesSharing,     // recipe -> ingredients -> other recipes
    RecipesIngredients, // ingredient -> recipes -> their ingredient lists
};

/// Relation/attribute traversal steps the plan performs; this is what makes a
/// template one-hop or two-hop.
inline int plan_hops(PlanKind k) {
    switch (k) {
        case PlanKind::Ingredients:
        case PlanKind::Attr:
        case PlanKind::Instructions:
        case PlanKind::DishTitle:
        case PlanKind::RecipesWith:
        case PlanKind::CountIngredients:
        case PlanKind::Exceeding:
            return 1;
        default:
            return 2;
    }
}

struct AnswerPlan {
    PlanKind kind;
    std::vector<std::string> slot_args;       // slot names, in plan-argument order
    std::optional<Nutrient> nutrient;         // Attr/IngredientsAttrs/SubstituteAttrs/Exceeding
    bool all_nutrients = false;               // `all` selector
    double threshold = 0.0;                   // Exceeding only
};

struct Template {
    std::string id;
    Hop hop;
    std::string pattern;                      // text with {slot} placeholders
    std::map<std::string, SlotKind> slot_kinds;
    AnswerPlan plan;
    std::string plan_text;                    // original plan expression
};

enum class QASource { Template, Augmented };

struct QAPair {
    std::string id;
    std::string question;
    std::string answer;
    std::string template_id; // empty for augmented pairs
    Hop hop = Hop::One;
    std::vector<EntityId> entities;
    std::optional<ImageLink> image;
    QASource source = QASource::Template;
};

/// Alternatives for substitution templates; the graph itself has no
/// substitution relation, so this ships as a data file
/// (`ingredient<TAB>alternative` per line).
struct SubstitutionTable {
    std::map<std::string, std::vector<std::string>> alternatives;

    static SubstitutionTable load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read substitution table: " + path.string());
        SubstitutionTable t;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            auto tab = s.find('\t');
            if (tab == std::string::npos)
                throw ParseError("substitution line is not `ingredient<TAB>alternative`: " + s,
                                 lineno);
            t.alternatives[to_lower(trim(s.substr(0, tab)))].push_back(
                to_lower(trim(s.substr(tab + 1))));
        }
        return t;
    }
};

namespace qa_detail {

inline std::set<std::string> pattern_slots(const std::string& pattern) {
    std::set<std::string> slots;
    size_t pos = 0;
    while ((pos = pattern.find('{', pos)) != std::string::npos) {
        size_t end = pattern.find('}', pos);
        if (end == std::string::npos) break;
        slots.insert(pattern.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return slots;
}

inline AnswerPlan parse_plan(const std::string& text, const Template& tmpl) {
    auto open = text.find('(');
    auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw ValidationError("template " + tmpl.id + ": plan is not `kind(args)`: " + text);
    std::string kind = trim(text.substr(0, open));
    std::vector<std::string> args;
    {
        std::string inner = text.substr(open + 1, close - open - 1);
        std::string cur;
        for (char c : inner) {
            if (c == ',') {
                args.push_back(trim(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        std::string last = trim(cur);
        if (!last.empty()) args.push_back(last);
    }

    static const std::map<std::string, PlanKind> kinds = {
        {"ingredients", PlanKind::Ingredients},
        {"attr", PlanKind::Attr},
        {"instructions", PlanKind::Instructions},
        {"dish_title", PlanKind::DishTitle},
        {"recipes_with", PlanKind::RecipesWith},
        {"count_ingredients", PlanKind::CountIngredients},
        {"exceeding", PlanKind::Exceeding},
        {"ingredients_attrs", PlanKind::IngredientsAttrs},
        {"recipes_with_both", PlanKind::RecipesWithBoth},
        {"substitute_attrs", PlanKind::SubstituteAttrs},
        {"common_ingredients", PlanKind::CommonIngredients},
        {"partner_ingredients", PlanKind::PartnerIngredients},
        {"recipes_sharing", PlanKind::RecipesSharing},
        {"recipes_ingredients", PlanKind::RecipesIngredients},
    };
    auto kit = kinds.find(kind);
    if (kit == kinds.end())
        throw ValidationError("template " + tmpl.id + ": unknown plan kind: " + kind);

    AnswerPlan plan;
    plan.kind = kit->second;

    auto expect_slot = [&](const std::string& arg, SlotKind want) {
        auto it = tmpl.slot_kinds.find(arg);
        if (it == tmpl.slot_kinds.end())
            throw ValidationError("template " + tmpl.id + ": plan references undeclared slot `" +
                                  arg + "`");
        if (it->second != want)
            throw ValidationError("template " + tmpl.id + ": slot `" + arg +
                                  "` has the wrong kind for plan " + kind);
        plan.slot_args.push_back(arg);
    };
    auto expect_selector = [&](const std::string& arg) {
        if (arg == "all") {
            plan.all_nutrients = true;
            return;
        }
        auto n = parse_nutrient(arg);
        if (!n)
            throw ValidationError("template " + tmpl.id + ": bad nutrient selector: " + arg);
        plan.nutrient = n;
    };
    auto arity = [&](size_t want) {
        if (args.size() != want)
            throw ValidationError("template " + tmpl.id + ": plan " + kind + " expects " +
                                  std::to_string(want) + " arguments");
    };

    switch (plan.kind) {
        case PlanKind::Ingredients:
        case PlanKind::Instructions:
        case PlanKind::DishTitle:
        case PlanKind::CountIngredients:
        case PlanKind::RecipesSharing:
            arity(1);
            expect_slot(args[0], SlotKind::Recipe);
            break;
        case PlanKind::RecipesWith:
        case PlanKind::PartnerIngredients:
        case PlanKind::RecipesIngredients:
            arity(1);
            expect_slot(args[0], SlotKind::Ingredient);
            break;
        case PlanKind::Attr:
            arity(2);
            expect_slot(args[0], SlotKind::Ingredient);
            expect_selector(args[1]);
            break;
        case PlanKind::Exceeding: {
            arity(2);
            auto n = parse_nutrient(args[0]);
            if (!n)
                throw ValidationError("template " + tmpl.id + ": bad nutrient: " + args[0]);
            plan.nutrient = n;
            try {
                plan.threshold = std::stod(args[1]);
            } catch (const std::exception&) {
                throw ValidationError("template " + tmpl.id + ": bad threshold: " + args[1]);
            }
            break;
        }
        case PlanKind::IngredientsAttrs:
            arity(2);
            expect_slot(args[0], SlotKind::Recipe);
            expect_selector(args[1]);
            break;
        case PlanKind::RecipesWithBoth:
            arity(2);
            expect_slot(args[0], SlotKind::Ingredient);
            expect_slot(args[1], SlotKind::Ingredient);
            break;
        case PlanKind::CommonIngredients:
            arity(2);
            expect_slot(args[0], SlotKind::Recipe);
            expect_slot(args[1], SlotKind::Recipe);
            break;
        case PlanKind::SubstituteAttrs:
            arity(4);
            expect_slot(args[0], SlotKind::Recipe);
            expect_slot(args[1], SlotKind::Ingredient);
            expect_slot(args[2], SlotKind::Alternative);
            expect_selector(args[3]);
            if (plan.all_nutrients)
                throw ValidationError("template " + tmpl.id +
                                      ": substitute_attrs needs a single nutrient");
            break;
    }
    return plan;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

inline std::string render_all_nutrients(const NutritionFacts& f) {
    return format_number(f.calories) + " kcal, " + format_number(f.fat) + " g fat, " +
           format_number(f.protein) + " g protein, " + format_number(f.carbohydrates) +
           " g carbohydrates";
}

} // namespace qa_detail

inline std::vector<std::string> split_decls(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

/// Structured text template file: records separated by `[template]` headers,
/// `key = value` lines for id, hop, pattern, slots, plan. `#` starts comments.
inline std::vector<Template> load_templates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read template file: " + path.string());

    std::vector<std::map<std::string, std::string>> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s == "[template]") {
            records.emplace_back();
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError("template line is not `key = value`: " + s, lineno);
        if (records.empty()) throw ParseError("template field before [template] header", lineno);
        records.back()[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }

    std::vector<Template> templates;
    std::set<std::string> ids;
    for (const auto& rec : records) {
        Template t;
        auto field = [&](const char* key) -> std::string {
            auto it = rec.find(key);
            if (it == rec.end())
                throw ValidationError(std::string("template is missing field `") + key + "`");
            return it->second;
        };
        t.id = field("id");
        if (!ids.insert(t.id).second)
            throw ValidationError("duplicate template id: " + t.id);
        auto hop = parse_hop(field("hop"));
        if (!hop) throw ValidationError("template " + t.id + ": hop must be `one` or `two`");
        t.hop = *hop;
        t.pattern = field("pattern");

        for (const auto& decl : split_decls(field("slots"))) {
            auto colon = decl.find(':');
            if (colon == std::string::npos)
                throw ValidationError("template " + t.id + ": slot declaration is not `name:kind`: " +
                                      decl);
            std::string name = trim(decl.substr(0, colon));
            std::string kind = trim(decl.substr(colon + 1));
            SlotKind sk;
            if (kind == "recipe") sk = SlotKind::Recipe;
            else if (kind == "ingredient") sk = SlotKind::Ingredient;
            else if (kind == "alternative") sk = SlotKind::Alternative;
            else throw ValidationError("template " + t.id + ": unknown slot kind: " + kind);
            t.slot_kinds[name] = sk;
        }

        for (const auto& slot : qa_detail::pattern_slots(t.pattern))
            if (t.slot_kinds.find(slot) == t.slot_kinds.end())
                throw ValidationError("template " + t.id + ": pattern slot `" + slot +
                                      "` has no declared kind");

        t.plan_text = field("plan");
        t.plan = qa_detail::parse_plan(t.plan_text, t);
        if (plan_hops(t.plan.kind) != (t.hop == Hop::One ? 1 : 2))
            throw ValidationError("template " + t.id + ": hop label does not match plan depth");
        templates.push_back(std::move(t));
    }
    return templates;
}

/// One concrete slot binding: slot name -> entity.
using Binding = std::map<std::string, EntityId>;

/// Executes a template's answer plan for a binding. Returns nullopt when the
/// binding yields an empty answer (such bindings are skipped). `steps_out`
/// reports the number of relation/attribute traversal steps actually taken.
inline std::optional<std::string> execute_plan(const Template& tmpl, const Binding& binding,
                                               const KnowledgeGraph& kg, int* steps_out = nullptr) {
    const AnswerPlan& plan = tmpl.plan;
    int steps = 0;
    auto arg = [&](size_t i) { return binding.at(plan.slot_args[i]); };
    std::optional<std::string> answer;

    switch (plan.kind) {
        case PlanKind::Ingredients: {
            auto ingredients = kg.ingredients_of(arg(0));
            ++steps;
            if (!ingredients.empty()) {
                std::vector<std::string> names;
                for (const auto& i : ingredients) names.push_back(i.canonical_name);
                answer = qa_detail::join(names, ", ");
            }
            break;
        }
        case PlanKind::Attr: {
            const auto& ing = kg.ingredient(arg(0));
            ++steps;
            if (ing.nutrition) {
                answer = plan.all_nutrients ? qa_detail::render_all_nutrients(*ing.nutrition)
                                            : render_nutrient(*ing.nutrition, *plan.nutrient);
            }
            break;
        }
        case PlanKind::Instructions: {
            const auto& r = kg.recipe(arg(0));
            ++steps;
            if (!r.instructions.empty()) answer = r.instructions;
            break;
        }
        case PlanKind::DishTitle: {
            const auto& r = kg.recipe(arg(0));
            ++steps;
            if (r.image) answer = r.title;
            break;
        }
        case PlanKind::RecipesWith: {
            auto recipes = kg.recipes_with(arg(0));
            ++steps;
            if (!recipes.empty()) {
                std::vector<std::string> titles;
                for (const auto& r : recipes) titles.push_back(r.title);
                answer = qa_detail::join(titles, ", ");
            }
            break;
        }
        case PlanKind::CountIngredients: {
            auto ingredients = kg.ingredients_of(arg(0));
            ++steps;
            if (!ingredients.empty()) answer = std::to_string(ingredients.size());
            break;
        }
        case PlanKind::Exceeding: {
            auto hits = kg.ingredients_exceeding(*plan.nutrient, plan.threshold);
            ++steps;
            if (!hits.empty()) {
                std::vector<std::string> names;
                for (const auto& i : hits) names.push_back(i.canonical_name);
                answer = qa_detail::join(names, ", ");
            }
            break;
        }
        case PlanKind::IngredientsAttrs: {
            auto ingredients = kg.ingredients_of(arg(0));
            ++steps;
            if (!ingredients.empty()) {
                ++steps;
                std::vector<std::string> parts;
                for (const auto& i : ingredients) {
                    if (!i.nutrition) {
                        parts.push_back(i.canonical_name);
                    } else if (plan.all_nutrients) {
                        parts.push_back(i.canonical_name + " (" +
                                        qa_detail::render_all_nutrients(*i.nutrition) + ")");
                    } else {
                        parts.push_back(i.canonical_name + " (" +
                                        render_nutrient(*i.nutrition, *plan.nutrient) + " " +
                                        std::string(nutrient_name(*plan.nutrient)) + ")");
                    }
                }
                answer = qa_detail::join(parts, "; ");
            }
            break;
        }
        case PlanKind::RecipesWithBoth: {
            auto shared = kg.recipes_with_both(arg(0), arg(1));
            steps += 2;
            if (!shared.empty()) {
                std::vector<std::string> titles;
                for (const auto& r : shared) titles.push_back(r.title);
                answer = qa_detail::join(titles, ", ");
            }
            break;
        }
        case PlanKind::SubstituteAttrs: {
            if (!kg.has_triple(arg(0), arg(1))) break; // ingredient must be in the recipe
            const auto& ing = kg.ingredient(arg(1));
            const auto& alt = kg.ingredient(arg(2));
            steps += 2;
            if (ing.nutrition && alt.nutrition) {
                Nutrient n = *plan.nutrient;
                double delta = nutrient_value(*alt.nutrition, n) - nutrient_value(*ing.nutrition, n);
                std::string unit(nutrient_unit(n));
                answer = "substituting " + ing.canonical_name + " (" +
                         render_nutrient(*ing.nutrition, n) + ") with " + alt.canonical_name +
                         " (" + render_nutrient(*alt.nutrition, n) + ") changes " +
                         std::string(nutrient_name(n)) + " by " + format_number(delta) + " " + unit;
            }
            break;
        }
        case PlanKind::CommonIngredients: {
            auto a = kg.ingredients_of(arg(0));
            auto b = kg.ingredients_of(arg(1));
            steps += 2;
            std::set<std::string> in_b;
            for (const auto& i : b) in_b.insert(i.canonical_name);
            std::vector<std::string> names;
            for (const auto& i : a)
                if (in_b.count(i.canonical_name) != 0) names.push_back(i.canonical_name);
            if (!names.empty()) answer = qa_detail::join(names, ", ");
            break;
        }
        case PlanKind::PartnerIngredients: {
            auto recipes = kg.recipes_with(arg(0));
            ++steps;
            if (!recipes.empty()) {
                ++steps;
                std::set<std::string> partners;
                for (const auto& r : recipes)
                    for (const auto& i : kg.ingredients_of(r.id))
                        if (i.id != arg(0)) partners.insert(i.canonical_name);
                if (!partners.empty())
                    answer = qa_detail::join({partners.begin(), partners.end()}, ", ");
            }
            break;
        }
        case PlanKind::RecipesSharing: {
            auto ingredients = kg.ingredients_of(arg(0));
            ++steps;
            if (!ingredients.empty()) {
                ++steps;
                std::map<std::string, std::string> titles; // sort key -> title
                for (const auto& i : ingredients)
                    for (const auto& r : kg.recipes_with(i.id))
                        if (r.id != arg(0)) titles[to_lower(r.title)] = r.title;
                if (!titles.empty()) {
                    std::vector<std::string> out;
                    for (const auto& [_, t] : titles) out.push_back(t);
                    answer = qa_detail::join(out, ", ");
                }
            }
            break;
        }
        case PlanKind::RecipesIngredients: {
            auto recipes = kg.recipes_with(arg(0));
            ++steps;
            if (!recipes.empty()) {
                ++steps;
                std::vector<std::string> parts;
                for (const auto& r : recipes) {
                    std::vector<std::string> others;
                    for (const auto& i : kg.ingredients_of(r.id))
                        if (i.id != arg(0)) others.push_back(i.canonical_name);
                    parts.push_back(others.empty()
                                        ? r.title
                                        : r.title + " (with " + qa_detail::join(others, ", ") + ")");
                }
                answer = qa_detail::join(parts, "; ");
            }
            break;
        }
    }

    if (steps_out != nullptr) *steps_out = steps;
    return answer;
}

inline std::string render_question(const Template& tmpl, const Binding& binding,
                                   const KnowledgeGraph& kg) {
    std::string out = tmpl.pattern;
    for (const auto& [slot, id] : binding) {
        std::string value = id.kind == EntityKind::Recipe ? kg.recipe(id).title
                                                          : kg.ingredient(id).canonical_name;
        std::string needle = "{" + slot + "}";
        size_t pos;
        while ((pos = out.find(needle)) != std::string::npos)
            out.replace(pos, needle.size(), value);
    }
    return out;
}

struct QaOptions {
    std::optional<size_t> per_template_limit; // nullopt = unlimited; 0 = empty corpus
    const SubstitutionTable* substitutions = nullptr;
};

namespace qa_detail {

inline std::vector<EntityId> sorted_recipe_ids(const KnowledgeGraph& kg) {
    std::vector<EntityId> ids;
    for (const auto& r : kg.recipes()) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end(), [&](EntityId a, EntityId b) {
        std::string ka = to_lower(kg.recipe(a).title), kb = to_lower(kg.recipe(b).title);
        if (ka != kb) return ka < kb;
        return a.local < b.local;
    });
    return ids;
}

inline std::vector<EntityId> sorted_ingredient_ids(const KnowledgeGraph& kg) {
    std::vector<EntityId> ids;
    for (const auto& i : kg.ingredients()) ids.push_back(i.id);
    std::sort(ids.begin(), ids.end(), [&](EntityId a, EntityId b) {
        return kg.ingredient(a).canonical_name < kg.ingredient(b).canonical_name;
    });
    return ids;
}

/// Enumerates bindings in deterministic sorted order and invokes fn until it
/// returns false.
inline void for_each_binding(const Template& tmpl, const KnowledgeGraph& kg,
                             const SubstitutionTable* subs,
                             const std::function<bool(const Binding&)>& fn) {
    std::vector<std::string> recipe_slots, ingredient_slots, alternative_slots;
    for (const auto& [name, kind] : tmpl.slot_kinds) {
        if (kind == SlotKind::Recipe) recipe_slots.push_back(name);
        else if (kind == SlotKind::Ingredient) ingredient_slots.push_back(name);
        else alternative_slots.push_back(name);
    }
    if (recipe_slots.size() > 2 || ingredient_slots.size() > 2 || alternative_slots.size() > 1)
        throw ValidationError("template " + tmpl.id + ": unsupported slot arity");
    if (!alternative_slots.empty() && ingredient_slots.size() != 1)
        throw ValidationError("template " + tmpl.id +
                              ": an alternative slot requires exactly one ingredient slot");

    auto recipes = recipe_slots.empty() ? std::vector<EntityId>{} : sorted_recipe_ids(kg);
    auto ingredients =
        ingredient_slots.empty() ? std::vector<EntityId>{} : sorted_ingredient_ids(kg);

    // Pairs of same-kind slots enumerate unordered (a < b in sort order); all
    // paired plans here are symmetric.
    auto enumerate_kind = [&](const std::vector<std::string>& slots,
                              const std::vector<EntityId>& pool,
                              std::vector<Binding>& partial) {
        if (slots.empty()) return;
        std::vector<Binding> next;
        if (slots.size() == 1) {
            for (const auto& base : partial)
                for (EntityId e : pool) {
                    Binding b = base;
                    b[slots[0]] = e;
                    next.push_back(std::move(b));
                }
        } else {
            for (const auto& base : partial)
                for (size_t i = 0; i < pool.size(); ++i)
                    for (size_t j = i + 1; j < pool.size(); ++j) {
                        Binding b = base;
                        b[slots[0]] = pool[i];
                        b[slots[1]] = pool[j];
                        next.push_back(std::move(b));
                    }
        }
        partial = std::move(next);
    };

    std::vector<Binding> bindings{Binding{}};
    enumerate_kind(recipe_slots, recipes, bindings);
    enumerate_kind(ingredient_slots, ingredients, bindings);

    for (const auto& base : bindings) {
        if (alternative_slots.empty()) {
            if (!fn(base)) return;
            continue;
        }
        if (subs == nullptr) return; // no table, no substitution bindings
        const auto& ing = kg.ingredient(base.at(ingredient_slots[0]));
        auto it = subs->alternatives.find(ing.canonical_name);
        if (it == subs->alternatives.end()) continue;
        for (const auto& alt_name : it->second) {
            auto alt = kg.find_ingredient(alt_name);
            if (!alt || *alt == ing.id) continue;
            Binding b = base;
            b[alternative_slots[0]] = *alt;
            if (!fn(b)) return;
        }
    }
}

} // namespace qa_detail

/// One QAPair per valid slot binding, deterministic order, empty-answer
/// bindings skipped. The KG must be frozen first.
inline std::vector<QAPair> instantiate(const Template& tmpl, const KnowledgeGraph& kg,
                                       const QaOptions& opts = {}) {
    if (!kg.frozen())
        throw ValidationError("instantiate: graph must be frozen before corpus generation");
    std::vector<QAPair> pairs;
    size_t seq = 0;
    qa_detail::for_each_binding(tmpl, kg, opts.substitutions, [&](const Binding& binding) {
        if (opts.per_template_limit && pairs.size() >= *opts.per_template_limit) return false;
        auto answer = execute_plan(tmpl, binding, kg);
        if (!answer) return true;
        QAPair pair;
        pair.question = render_question(tmpl, binding, kg);
        pair.answer = *answer;
        pair.template_id = tmpl.id;
        pair.hop = tmpl.hop;
        pair.source = QASource::Template;
        for (const auto& entry : binding) pair.entities.push_back(entry.second);
        std::sort(pair.entities.begin(), pair.entities.end());
        for (const auto& entry : binding) {
            if (entry.second.kind != EntityKind::Recipe) continue;
            const auto& r = kg.recipe(entry.second);
            if (r.image) {
                pair.image = r.image;
                break;
            }
        }
        pair.id = tmpl.id + "#" + std::to_string(seq++);
        pairs.push_back(std::move(pair));
        return true;
    });
    return pairs;
}

/// Concatenation over all templates, each pair carrying provenance.
inline std::vector<QAPair> generate_corpus(const KnowledgeGraph& kg,
                                           std::span<const Template> templates,
                                           const QaOptions& opts = {}) {
    std::vector<QAPair> corpus;
    for (const auto& t : templates) {
        auto pairs = instantiate(t, kg, opts);
        corpus.insert(corpus.end(), std::make_move_iterator(pairs.begin()),
                      std::make_move_iterator(pairs.end()));
    }
    return corpus;
}

// ---- JSON Lines corpus I/O --------------------------------------------------

inline nlohmann::json qa_pair_to_json(const QAPair& p) {
    nlohmann::json j;
    j["id"] = p.id;
    j["question"] = p.question;
    j["answer"] = p.answer;
    j["template_id"] = p.template_id;
    j["hop"] = std::string(hop_name(p.hop));
    std::vector<std::string> ids;
    for (const auto& e : p.entities) ids.push_back(e.str());
    j["entities"] = ids;
    if (p.image) j["image"] = {{"path", p.image->path}, {"verified", p.image->verified}};
    else j["image"] = nullptr;
    j["source"] = p.source == QASource::Template ? "template" : "augmented";
    return j;
}

inline QAPair qa_pair_from_json(const nlohmann::json& j) {
    QAPair p;
    p.id = j.value("id", "");
    p.question = j.at("question").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    p.template_id = j.value("template_id", "");
    if (j.contains("hop")) {
        auto h = parse_hop(j.at("hop").get<std::string>());
        if (!h) throw ValidationError("bad hop value in QA pair");
        p.hop = *h;
    }
    if (j.contains("entities"))
        for (const auto& e : j.at("entities")) {
            auto id = EntityId::parse(e.get<std::string>());
            if (!id) throw ValidationError("bad entity id in QA pair: " + e.get<std::string>());
            p.entities.push_back(*id);
        }
    if (j.contains("image") && !j.at("image").is_null())
        p.image = ImageLink{j.at("image").at("path").get<std::string>(),
                            j.at("image").value("verified", false)};
    std::string source = j.value("source", "template");
    p.source = source == "augmented" ? QASource::Augmented : QASource::Template;
    return p;
}

inline void save_corpus(const std::vector<QAPair>& corpus, const std::filesystem::path& path) {
    std::string out;
    for (const auto& p : corpus) out += qa_pair_to_json(p).dump() + "\n";
    write_file(path, out);
}

inline std::vector<QAPair> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read corpus file: " + path.string());
    std::vector<QAPair> corpus;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            corpus.push_back(qa_pair_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad corpus line: ") + e.what(), lineno);
        }
    }
    return corpus;
}

struct AugmentedIssue {
    int line = 0;
    std::string issue;
};

struct AugmentedIngest {
    std::vector<QAPair> pairs;
    std::vector<AugmentedIssue> issues;
};

/// Ingests externally produced QA pairs (JSON Lines). Malformed lines are
/// recorded and skipped; entity references that do not resolve in the KG are
/// flagged but the pair is kept.
inline AugmentedIngest ingest_augmented(const std::filesystem::path& path,
                                        const KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read augmented file: " + path.string());
    AugmentedIngest out;
    std::string line;
    int lineno = 0;
    size_t seq = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            out.issues.push_back({lineno, std::string("malformed JSON: ") + e.what()});
            continue;
        }
        QAPair p;
        try {
            p = qa_pair_from_json(j);
        } catch (const std::exception& e) {
            out.issues.push_back({lineno, e.what()});
            continue;
        }
        if (p.question.empty() || p.answer.empty()) {
            out.issues.push_back({lineno, "question and answer must be non-empty"});
            continue;
        }
        p.source = QASource::Augmented;
        p.template_id.clear();
        if (p.id.empty()) p.id = "aug#" + std::to_string(seq);
        ++seq;
        std::vector<EntityId> valid;
        for (const auto& e : p.entities) {
            bool known = e.kind == EntityKind::Recipe ? e.local < kg.recipes().size()
                                                      : e.local < kg.ingredients().size();
            if (known) valid.push_back(e);
            else out.issues.push_back({lineno, "unknown entity reference: " + e.str()});
        }
        p.entities = std::move(valid);
        out.pairs.push_back(std::move(p));
    }
    return out;
}

} // namespace mmkg
