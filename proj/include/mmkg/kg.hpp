#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmkg/errors.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

enum class EntityKind { Recipe, Ingredient };

struct EntityId {
    EntityKind kind;
    std::uint32_t local;

    auto operator<=>(const EntityId&) const = default;

    std::string str() const {
        return (kind == EntityKind::Recipe ? "R:" : "I:") + std::to_string(local);
    }

    static std::optional<EntityId> parse(std::string_view s) {
        if (s.size() < 3 || s[1] != ':') return std::nullopt;
        EntityKind kind;
        if (s[0] == 'R') kind = EntityKind::Recipe;
        else if (s[0] == 'I') kind = EntityKind::Ingredient;
        else return std::nullopt;
        std::uint32_t v = 0;
        for (char c : s.substr(2)) {
            if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
            v = v * 10 + static_cast<std::uint32_t>(c - '0');
        }
        return EntityId{kind, v};
    }
};

struct NutritionFacts {
    double calories = 0.0;      // kcal
    double fat = 0.0;           // g
    double protein = 0.0;       // g
    double carbohydrates = 0.0; // g

    void validate() const {
        for (double v : {calories, fat, protein, carbohydrates})
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError("nutrition values must be finite and non-negative");
    }

    bool operator==(const NutritionFacts&) const = default;
};

enum class Nutrient { Calories, Fat, Protein, Carbohydrates };

inline std::string_view nutrient_name(Nutrient n) {
    switch (n) {
        case Nutrient::Calories: return "calories";
        case Nutrient::Fat: return "fat";
        case Nutrient::Protein: return "protein";
        case Nutrient::Carbohydrates: return "carbohydrates";
    }
    return "";
}

inline std::optional<Nutrient> parse_nutrient(std::string_view s) {
    if (s == "calories") return Nutrient::Calories;
    if (s == "fat") return Nutrient::Fat;
    if (s == "protein") return Nutrient::Protein;
    if (s == "carbohydrates") return Nutrient::Carbohydrates;
    return std::nullopt;
}

inline std::string_view nutrient_unit(Nutrient n) {
    return n == Nutrient::Calories ? "kcal" : "g";
}

inline double nutrient_value(const NutritionFacts& f, Nutrient n) {
    switch (n) {
        case Nutrient::Calories: return f.calories;
        case Nutrient::Fat: return f.fat;
        case Nutrient::Protein: return f.protein;
        case Nutrient::Carbohydrates: return f.carbohydrates;
    }
    return 0.0;
}

/// "52 kcal" / "15 g" style rendering used by attribute answers.
inline std::string render_nutrient(const NutritionFacts& f, Nutrient n) {
    return format_number(nutrient_value(f, n)) + " " + std::string(nutrient_unit(n));
}

struct ImageLink {
    std::string path;
    bool verified = false;

    bool operator==(const ImageLink&) const = default;
};

struct RecipeEntity {
    EntityId id;
    std::string title;
    std::string instructions;
    std::optional<ImageLink> image;
};

struct IngredientEntity {
    EntityId id;
    std::string canonical_name;
    std::optional<NutritionFacts> nutrition;
    std::optional<ImageLink> image;
};

enum class Predicate { HasIngredient };

struct Triple {
    EntityId subject;
    Predicate predicate = Predicate::HasIngredient;
    EntityId object;

    auto operator<=>(const Triple&) const = default;
};

struct GraphStats {
    size_t recipes = 0;
    size_t ingredients = 0;
    size_t relations = 0;
    size_t ingredient_images = 0;
    size_t recipe_images = 0;

    bool operator==(const GraphStats&) const = default;
};

/// In-memory multimodal knowledge graph. Adjacency is kept in both directions
/// so one- and two-hop queries never scan the triple table. The build phase is
/// single-writer; freeze() makes the graph immutable and safe for unlimited
/// concurrent readers.
class KnowledgeGraph {
public:
    // ---- build phase -------------------------------------------------------

    /// Adds a recipe, or returns the existing id when the case-folded,
    /// trimmed title already exists.
    EntityId add_recipe(std::string_view title, std::string_view instructions = "",
                        std::optional<ImageLink> image = std::nullopt) {
        ensure_mutable();
        std::string t = trim(title);
        if (t.empty()) throw ValidationError("recipe title must be non-empty");
        std::string key = to_lower(t);
        auto it = recipe_by_title_.find(key);
        if (it != recipe_by_title_.end()) {
            auto& existing = recipes_[it->second];
            if (!existing.image && image) existing.image = std::move(image);
            if (existing.instructions.empty() && !instructions.empty())
                existing.instructions = std::string(instructions);
            return existing.id;
        }
        EntityId id{EntityKind::Recipe, static_cast<std::uint32_t>(recipes_.size())};
        recipes_.push_back({id, t, std::string(instructions), std::move(image)});
        recipe_links_.emplace_back();
        recipe_by_title_.emplace(std::move(key), id.local);
        return id;
    }

    /// Adds a standardized ingredient, idempotent on the canonical name.
    /// Nutrition is merged only when absent on the existing entity.
    EntityId add_ingredient(std::string_view canonical_name,
                            std::optional<NutritionFacts> nutrition = std::nullopt,
                            std::optional<ImageLink> image = std::nullopt) {
        ensure_mutable();
        std::string name = trim(canonical_name);
        if (name.empty()) throw ValidationError("ingredient name must be non-empty");
        for (char c : name) {
            if (std::isdigit(static_cast<unsigned char>(c)))
                throw ValidationError("ingredient name is not standardized (contains digits): " + name);
            if (std::isupper(static_cast<unsigned char>(c)))
                throw ValidationError("ingredient name is not standardized (not lowercase): " + name);
        }
        if (nutrition) nutrition->validate();
        auto it = ingredient_by_name_.find(name);
        if (it != ingredient_by_name_.end()) {
            auto& existing = ingredients_[it->second];
            if (!existing.nutrition && nutrition) existing.nutrition = nutrition;
            if (!existing.image && image) existing.image = std::move(image);
            return existing.id;
        }
        EntityId id{EntityKind::Ingredient, static_cast<std::uint32_t>(ingredients_.size())};
        ingredients_.push_back({id, name, nutrition, std::move(image)});
        ingredient_links_.emplace_back();
        ingredient_by_name_.emplace(std::move(name), id.local);
        return id;
    }

    /// Records <recipe> hasIngredient <ingredient>. Duplicate links are no-ops.
    void link_ingredient(EntityId recipe, EntityId ingredient) {
        ensure_mutable();
        if (recipe.kind != EntityKind::Recipe || ingredient.kind != EntityKind::Ingredient)
            throw ValidationError("link_ingredient: subject must be a recipe and object an ingredient");
        require(recipe);
        require(ingredient);
        if (recipe_links_[recipe.local].insert(ingredient.local).second) {
            ingredient_links_[ingredient.local].insert(recipe.local);
            ++relation_count_;
        }
    }

    void set_nutrition(EntityId ingredient, const NutritionFacts& facts) {
        ensure_mutable();
        facts.validate();
        if (ingredient.kind != EntityKind::Ingredient)
            throw ValidationError("set_nutrition: not an ingredient id");
        require(ingredient);
        ingredients_[ingredient.local].nutrition = facts;
    }

    void set_image(EntityId id, ImageLink link) {
        ensure_mutable();
        if (link.path.empty()) throw ValidationError("image path must be non-empty");
        require(id);
        if (id.kind == EntityKind::Recipe) recipes_[id.local].image = std::move(link);
        else ingredients_[id.local].image = std::move(link);
    }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    // ---- lookups -----------------------------------------------------------

    const RecipeEntity& recipe(EntityId id) const {
        if (id.kind != EntityKind::Recipe) throw ValidationError("not a recipe id: " + id.str());
        require(id);
        return recipes_[id.local];
    }

    const IngredientEntity& ingredient(EntityId id) const {
        if (id.kind != EntityKind::Ingredient)
            throw ValidationError("not an ingredient id: " + id.str());
        require(id);
        return ingredients_[id.local];
    }

    std::optional<EntityId> find_recipe(std::string_view title) const {
        auto it = recipe_by_title_.find(to_lower(trim(title)));
        if (it == recipe_by_title_.end()) return std::nullopt;
        return recipes_[it->second].id;
    }

    std::optional<EntityId> find_ingredient(std::string_view name) const {
        auto it = ingredient_by_name_.find(trim(name));
        if (it == ingredient_by_name_.end()) return std::nullopt;
        return ingredients_[it->second].id;
    }

    const std::vector<RecipeEntity>& recipes() const { return recipes_; }
    const std::vector<IngredientEntity>& ingredients() const { return ingredients_; }

    // ---- queries (deterministic, name-sorted) ------------------------------

    std::vector<IngredientEntity> ingredients_of(EntityId recipe_id) const {
        if (recipe_id.kind != EntityKind::Recipe)
            throw ValidationError("ingredients_of: not a recipe id");
        require(recipe_id);
        std::vector<IngredientEntity> out;
        for (std::uint32_t i : recipe_links_[recipe_id.local]) out.push_back(ingredients_[i]);
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.canonical_name < b.canonical_name;
        });
        return out;
    }

    std::vector<RecipeEntity> recipes_with(EntityId ingredient_id) const {
        if (ingredient_id.kind != EntityKind::Ingredient)
            throw ValidationError("recipes_with: not an ingredient id");
        require(ingredient_id);
        std::vector<RecipeEntity> out;
        for (std::uint32_t r : ingredient_links_[ingredient_id.local]) out.push_back(recipes_[r]);
        sort_recipes(out);
        return out;
    }

    std::vector<RecipeEntity> recipes_with_both(EntityId a, EntityId b) const {
        if (a.kind != EntityKind::Ingredient || b.kind != EntityKind::Ingredient)
            throw ValidationError("recipes_with_both: both ids must be ingredients");
        require(a);
        require(b);
        std::vector<RecipeEntity> out;
        for (std::uint32_t r : ingredient_links_[a.local])
            if (ingredient_links_[b.local].count(r) != 0) out.push_back(recipes_[r]);
        sort_recipes(out);
        return out;
    }

    /// Ingredients whose given nutrient strictly exceeds the threshold.
    /// Ingredients without nutrition never qualify.
    std::vector<IngredientEntity> ingredients_exceeding(Nutrient nutrient, double threshold) const {
        if (!std::isfinite(threshold))
            throw ValidationError("ingredients_exceeding: threshold must be finite");
        std::vector<IngredientEntity> out;
        for (const auto& ing : ingredients_)
            if (ing.nutrition && nutrient_value(*ing.nutrition, nutrient) > threshold)
                out.push_back(ing);
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.canonical_name < b.canonical_name;
        });
        return out;
    }

    GraphStats stats() const {
        GraphStats s;
        s.recipes = recipes_.size();
        s.ingredients = ingredients_.size();
        s.relations = relation_count_;
        for (const auto& r : recipes_) s.recipe_images += r.image.has_value();
        for (const auto& i : ingredients_) s.ingredient_images += i.image.has_value();
        return s;
    }

    /// Materialized triple table, sorted by (subject, object). Query results
    /// and the integrity scan can be checked against this.
    std::vector<Triple> triples() const {
        std::vector<Triple> out;
        out.reserve(relation_count_);
        for (std::uint32_t r = 0; r < recipe_links_.size(); ++r)
            for (std::uint32_t i : recipe_links_[r])
                out.push_back({{EntityKind::Recipe, r}, Predicate::HasIngredient,
                               {EntityKind::Ingredient, i}});
        return out;
    }

    bool has_triple(EntityId recipe_id, EntityId ingredient_id) const {
        if (recipe_id.kind != EntityKind::Recipe || ingredient_id.kind != EntityKind::Ingredient)
            return false;
        if (recipe_id.local >= recipes_.size() || ingredient_id.local >= ingredients_.size())
            return false;
        return recipe_links_[recipe_id.local].count(ingredient_id.local) != 0;
    }

    // ---- persistence -------------------------------------------------------

    /// Text triple format, one record per line, tab-separated. Entity
    /// declarations first (R: title/instructions/image attributes, then I:
    /// name/nutrition/image), then hasIngredient triples sorted by (R, I).
    /// Strings escape backslash, tab, and newline. `#` starts a comment.
    void save(const std::filesystem::path& path) const {
        write_file(path, serialize());
    }

    std::string serialize() const {
        std::ostringstream out;
        out << "# mmkg triple file\n";
        for (const auto& r : recipes_) {
            out << r.id.str() << "\ttitle\t" << escape(r.title) << "\n";
            if (!r.instructions.empty())
                out << r.id.str() << "\tinstructions\t" << escape(r.instructions) << "\n";
            if (r.image) {
                out << r.id.str() << "\timagePath\t" << escape(r.image->path) << "\n";
                out << r.id.str() << "\timageVerified\t" << (r.image->verified ? 1 : 0) << "\n";
            }
        }
        for (const auto& i : ingredients_) {
            out << i.id.str() << "\tname\t" << escape(i.canonical_name) << "\n";
            if (i.nutrition) {
                out << i.id.str() << "\tcalories\t" << format_number(i.nutrition->calories) << "\n";
                out << i.id.str() << "\tfat\t" << format_number(i.nutrition->fat) << "\n";
                out << i.id.str() << "\tprotein\t" << format_number(i.nutrition->protein) << "\n";
                out << i.id.str() << "\tcarbohydrates\t"
                    << format_number(i.nutrition->carbohydrates) << "\n";
            }
            if (i.image) {
                out << i.id.str() << "\timagePath\t" << escape(i.image->path) << "\n";
                out << i.id.str() << "\timageVerified\t" << (i.image->verified ? 1 : 0) << "\n";
            }
        }
        for (const auto& t : triples())
            out << t.subject.str() << "\thasIngredient\t" << t.object.str() << "\n";
        return out.str();
    }

    static KnowledgeGraph load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read graph file: " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return deserialize(ss.str());
    }

    static KnowledgeGraph deserialize(std::string_view text) {
        KnowledgeGraph g;
        int lineno = 0;
        size_t pos = 0;
        while (pos <= text.size()) {
            size_t eol = text.find('\n', pos);
            std::string_view line = text.substr(pos, eol == std::string_view::npos
                                                         ? std::string_view::npos
                                                         : eol - pos);
            pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            g.apply_line(line, lineno);
        }
        return g;
    }

private:
    std::vector<RecipeEntity> recipes_;
    std::vector<IngredientEntity> ingredients_;
    std::unordered_map<std::string, std::uint32_t> recipe_by_title_;
    std::unordered_map<std::string, std::uint32_t> ingredient_by_name_;
    std::vector<std::set<std::uint32_t>> recipe_links_;     // recipe -> ingredients
    std::vector<std::set<std::uint32_t>> ingredient_links_; // ingredient -> recipes
    size_t relation_count_ = 0;
    bool frozen_ = false;

    void ensure_mutable() const {
        if (frozen_) throw ValidationError("graph is frozen; no further mutation allowed");
    }

    void require(EntityId id) const {
        bool ok = id.kind == EntityKind::Recipe ? id.local < recipes_.size()
                                                : id.local < ingredients_.size();
        if (!ok) throw ValidationError("unknown entity id: " + id.str());
    }

    static void sort_recipes(std::vector<RecipeEntity>& v) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            std::string ka = to_lower(a.title), kb = to_lower(b.title);
            if (ka != kb) return ka < kb;
            return a.id.local < b.id.local;
        });
    }

    static std::string escape(std::string_view s) {
        std::string out;
        out.reserve(s.size());
        for (char c : s) {
            if (c == '\\') out += "\\\\";
            else if (c == '\t') out += "\\t";
            else if (c == '\n') out += "\\n";
            else out.push_back(c);
        }
        return out;
    }

    static std::string unescape(std::string_view s, int lineno) {
        std::string out;
        out.reserve(s.size());
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '\\') {
                out.push_back(s[i]);
                continue;
            }
            if (i + 1 >= s.size()) throw ParseError("dangling escape", lineno);
            char c = s[++i];
            if (c == '\\') out.push_back('\\');
            else if (c == 't') out.push_back('\t');
            else if (c == 'n') out.push_back('\n');
            else throw ParseError(std::string("unknown escape: \\") + c, lineno);
        }
        return out;
    }

    void apply_line(std::string_view line, int lineno) {
        std::vector<std::string_view> fields;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : tab - start));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 3) throw ParseError("expected 3 tab-separated fields", lineno);
        auto id = EntityId::parse(fields[0]);
        if (!id) throw ParseError("bad entity id: " + std::string(fields[0]), lineno);
        const std::string_view attr = fields[1];
        const std::string_view value = fields[2];

        if (attr == "title") {
            if (id->kind != EntityKind::Recipe) throw ParseError("title on non-recipe", lineno);
            if (id->local != recipes_.size())
                throw ParseError("recipe ids must be declared densely in order", lineno);
            add_recipe(unescape(value, lineno));
            return;
        }
        if (attr == "name") {
            if (id->kind != EntityKind::Ingredient) throw ParseError("name on non-ingredient", lineno);
            if (id->local != ingredients_.size())
                throw ParseError("ingredient ids must be declared densely in order", lineno);
            add_ingredient(unescape(value, lineno));
            return;
        }
        if (attr == "hasIngredient") {
            auto obj = EntityId::parse(value);
            if (!obj) throw ParseError("bad object id: " + std::string(value), lineno);
            try {
                link_ingredient(*id, *obj);
            } catch (const ValidationError& e) {
                throw ParseError(e.what(), lineno);
            }
            return;
        }

        // attribute on an already-declared entity
        if ((id->kind == EntityKind::Recipe && id->local >= recipes_.size()) ||
            (id->kind == EntityKind::Ingredient && id->local >= ingredients_.size()))
            throw ParseError("attribute before entity declaration: " + id->str(), lineno);

        if (attr == "instructions") {
            if (id->kind != EntityKind::Recipe) throw ParseError("instructions on non-recipe", lineno);
            recipes_[id->local].instructions = unescape(value, lineno);
            return;
        }
        if (attr == "imagePath") {
            ImageLink link{unescape(value, lineno), false};
            if (id->kind == EntityKind::Recipe) recipes_[id->local].image = link;
            else ingredients_[id->local].image = link;
            return;
        }
        if (attr == "imageVerified") {
            auto& image = id->kind == EntityKind::Recipe ? recipes_[id->local].image
                                                         : ingredients_[id->local].image;
            if (!image) throw ParseError("imageVerified before imagePath", lineno);
            if (value != "0" && value != "1")
                throw ParseError("imageVerified must be 0 or 1", lineno);
            image->verified = value == "1";
            return;
        }
        if (auto nutrient = parse_nutrient(attr)) {
            if (id->kind != EntityKind::Ingredient)
                throw ParseError("nutrition attribute on non-ingredient", lineno);
            double v = 0.0;
            try {
                size_t used = 0;
                v = std::stod(std::string(value), &used);
                if (used != value.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw ParseError("bad numeric value: " + std::string(value), lineno);
            }
            auto& ing = ingredients_[id->local];
            NutritionFacts facts = ing.nutrition.value_or(NutritionFacts{});
            switch (*nutrient) {
                case Nutrient::Calories: facts.calories = v; break;
                case Nutrient::Fat: facts.fat = v; break;
                case Nutrient::Protein: facts.protein = v; break;
                case Nutrient::Carbohydrates: facts.carbohydrates = v; break;
            }
            try {
                facts.validate();
            } catch (const ValidationError& e) {
                throw ParseError(e.what(), lineno);
            }
            ing.nutrition = facts;
            return;
        }
        throw ParseError("unknown attribute: " + std::string(attr), lineno);
    }
};

/// Full-scan referential integrity check: every triple endpoint must resolve
/// to an existing entity of the declared kind, and the two adjacency
/// directions must mirror each other.
inline bool check_integrity(const KnowledgeGraph& g, std::string* issue = nullptr) {
    for (const auto& t : g.triples()) {
        if (t.subject.kind != EntityKind::Recipe || t.subject.local >= g.recipes().size()) {
            if (issue) *issue = "dangling subject " + t.subject.str();
            return false;
        }
        if (t.object.kind != EntityKind::Ingredient || t.object.local >= g.ingredients().size()) {
            if (issue) *issue = "dangling object " + t.object.str();
            return false;
        }
        bool forward = false, backward = false;
        for (const auto& ing : g.ingredients_of(t.subject))
            forward |= ing.id == t.object;
        for (const auto& rec : g.recipes_with(t.object))
            backward |= rec.id == t.subject;
        if (!forward || !backward) {
            if (issue) *issue = "adjacency mismatch on " + t.subject.str() + " -> " + t.object.str();
            return false;
        }
    }
    if (g.stats().relations != g.triples().size()) {
        if (issue) *issue = "relation count does not match triple scan";
        return false;
    }
    return true;
}

} // namespace mmkg
