#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmkg/csv.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/kg.hpp"
#include "mmkg/standardize.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

struct RawRecipeRecord {
    std::string title;
    std::vector<std::string> raw_ingredients;
    std::string instructions;
    std::optional<std::string> image_path;
};

struct RejectedRow {
    int row = 0; // 1-based data row number
    std::string reason;
};

struct ParsedRecipes {
    std::vector<RawRecipeRecord> records;
    std::vector<RejectedRow> rejects;
};

inline std::vector<std::string> split_list(const std::string& field) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : field) {
        if (c == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

/// Recipes CSV: header `title,ingredients,instructions,image`; `ingredients`
/// is a comma-separated list inside one (usually quoted) field. Malformed rows
/// go to the rejects report instead of failing the parse.
inline ParsedRecipes parse_recipes(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    int title_col = csv::column_index(table, "title");
    int ing_col = csv::column_index(table, "ingredients");
    int instr_col = csv::column_index(table, "instructions");
    int image_col = csv::column_index(table, "image");
    if (title_col < 0 || ing_col < 0)
        throw ParseError("recipes CSV must have `title` and `ingredients` columns: " +
                             path.string(),
                         1);

    ParsedRecipes out;
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const int rowno = static_cast<int>(r) + 1;
        if (row.size() != table.header.size()) {
            out.rejects.push_back({rowno, "wrong field count"});
            continue;
        }
        RawRecipeRecord rec;
        rec.title = trim(row[static_cast<size_t>(title_col)]);
        if (rec.title.empty()) {
            out.rejects.push_back({rowno, "missing title"});
            continue;
        }
        for (const auto& part : split_list(row[static_cast<size_t>(ing_col)])) {
            if (!part.empty()) rec.raw_ingredients.push_back(part);
        }
        if (rec.raw_ingredients.empty()) {
            out.rejects.push_back({rowno, "empty ingredient list"});
            continue;
        }
        if (instr_col >= 0) rec.instructions = trim(row[static_cast<size_t>(instr_col)]);
        if (image_col >= 0) {
            std::string img = trim(row[static_cast<size_t>(image_col)]);
            if (!img.empty()) rec.image_path = img;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

struct EnrichmentReport {
    size_t attached = 0;
    std::vector<std::string> unmatched;  // table names with no KG ingredient
    std::vector<std::string> duplicates; // names seen more than once (first row wins)
    std::vector<RejectedRow> rejects;    // rows with negative or unparsable values
};

/// Nutrition CSV: header `ingredient,calories,fat,protein,carbohydrates`.
/// Attaches facts to matching ingredients; the first row wins on duplicates.
inline EnrichmentReport enrich_nutrition(KnowledgeGraph& kg, const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    const char* cols[] = {"ingredient", "calories", "fat", "protein", "carbohydrates"};
    int idx[5];
    for (int i = 0; i < 5; ++i) {
        idx[i] = csv::column_index(table, cols[i]);
        if (idx[i] < 0)
            throw ParseError(std::string("nutrition CSV missing column `") + cols[i] + "`", 1);
    }

    EnrichmentReport report;
    std::map<std::string, int> seen;
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const int rowno = static_cast<int>(r) + 1;
        if (row.size() != table.header.size()) {
            report.rejects.push_back({rowno, "wrong field count"});
            continue;
        }
        std::string name = trim(row[static_cast<size_t>(idx[0])]);
        if (seen[name]++ > 0) {
            report.duplicates.push_back(name);
            continue;
        }
        NutritionFacts facts;
        double* slots[] = {&facts.calories, &facts.fat, &facts.protein, &facts.carbohydrates};
        bool bad = false;
        for (int i = 1; i < 5; ++i) {
            try {
                *slots[i - 1] = std::stod(row[static_cast<size_t>(idx[i])]);
            } catch (const std::exception&) {
                bad = true;
                break;
            }
            if (*slots[i - 1] < 0.0) bad = true;
        }
        if (bad) {
            report.rejects.push_back({rowno, "negative or unparsable nutrient value"});
            continue;
        }
        auto id = kg.find_ingredient(name);
        if (!id) {
            report.unmatched.push_back(name);
            continue;
        }
        kg.set_nutrition(*id, facts);
        ++report.attached;
    }
    return report;
}

struct ImageLinkReport {
    size_t linked = 0;
    size_t missing_files = 0;          // linked with verified=false
    std::vector<std::string> unmatched; // manifest names with no KG entity
};

/// Image manifest: tab-separated `entity_name<TAB>path`, where entity_name is
/// a recipe title or canonical ingredient name. Paths are resolved relative to
/// the manifest's directory; verified is set only when the file exists.
inline ImageLinkReport link_images(KnowledgeGraph& kg, const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot read image manifest: " + manifest_path.string());
    const auto base = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                      : std::filesystem::path(".");
    ImageLinkReport report;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto tab = s.find('\t');
        if (tab == std::string::npos)
            throw ParseError("manifest line is not `entity_name<TAB>path`: " + s, lineno);
        std::string name = trim(s.substr(0, tab));
        std::string rel = trim(s.substr(tab + 1));

        std::optional<EntityId> id = kg.find_recipe(name);
        if (!id) id = kg.find_ingredient(name);
        if (!id) {
            report.unmatched.push_back(name);
            continue;
        }
        bool exists = std::filesystem::exists(base / rel);
        kg.set_image(*id, ImageLink{rel, exists});
        if (!exists) ++report.missing_files;
        ++report.linked;
    }
    return report;
}

struct BuildReport {
    GraphStats stats;
    std::vector<RejectedRow> recipe_rejects;
    EnrichmentReport nutrition;
    ImageLinkReport images;
};

/// Full construction: parse recipes, standardize ingredient strings, link
/// triples, enrich nutrition, attach images. Deterministic for fixed inputs
/// and resolver, so reruns persist byte-identically.
inline KnowledgeGraph build_graph(const std::filesystem::path& recipes_path,
                                  const std::filesystem::path& nutrition_path,
                                  const std::filesystem::path& manifest_path,
                                  const Standardizer& standardizer,
                                  BuildReport* report = nullptr,
                                  const ExternalResolver* resolver = nullptr) {
    KnowledgeGraph kg;
    auto parsed = parse_recipes(recipes_path);
    for (const auto& rec : parsed.records) {
        EntityId rid = kg.add_recipe(rec.title, rec.instructions);
        for (const auto& raw : rec.raw_ingredients) {
            std::string canonical = standardizer.standardize(raw, resolver);
            EntityId iid = kg.add_ingredient(canonical);
            kg.link_ingredient(rid, iid);
        }
    }
    EnrichmentReport nutrition = enrich_nutrition(kg, nutrition_path);
    ImageLinkReport images = link_images(kg, manifest_path);
    if (report != nullptr) {
        report->stats = kg.stats();
        report->recipe_rejects = parsed.rejects;
        report->nutrition = std::move(nutrition);
        report->images = std::move(images);
    }
    return kg;
}

/// Rejects report as JSON Lines, one `{"row": n, "reason": "..."}` per entry.
inline std::string rejects_to_jsonl(const std::vector<RejectedRow>& rejects) {
    std::string out;
    for (const auto& r : rejects) {
        std::string reason;
        for (char c : r.reason) {
            if (c == '"' || c == '\\') reason.push_back('\\');
            reason.push_back(c);
        }
        out += "{\"row\": " + std::to_string(r.row) + ", \"reason\": \"" + reason + "\"}\n";
    }
    return out;
}

} // namespace mmkg
