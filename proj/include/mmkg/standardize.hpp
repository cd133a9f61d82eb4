#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "mmkg/errors.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

/// Pluggable stand-in for an external model-based resolver. Consulted only
/// when the rule pipeline cannot produce a canonical name on its own.
class ExternalResolver {
public:
    virtual ~ExternalResolver() = default;
    virtual std::string resolve(std::string_view raw) const = 0;
};

/// Deterministic ordered rule pipeline that maps raw ingredient phrases to
/// canonical names: quantity regexes, unit lexicon, modifier lexicon, synonym
/// map, then naive singularization of the last word. The lexicons are data
/// files, loaded from a directory:
///
///   units.txt                one unit token per line
///   modifiers.txt            one modifier token per line
///   synonyms.tsv             `phrase<TAB>replacement` per line
///   singular_exceptions.txt  words that must not be singularized
///
/// `#` starts a comment in all four files. Output is lowercase with single
/// spaces and contains no digits, units, or listed modifiers; the pipeline is
/// idempotent.
class Standardizer {
public:
    static Standardizer load_dir(const std::filesystem::path& dir) {
        Standardizer s;
        s.units_ = read_token_set(dir / "units.txt");
        s.modifiers_ = read_token_set(dir / "modifiers.txt");
        s.singular_exceptions_ = read_token_set(dir / "singular_exceptions.txt");
        for (const auto& line : read_lines(dir / "synonyms.tsv")) {
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw ParseError("synonyms.tsv line is not `phrase<TAB>replacement`: " + line, 0);
            s.synonyms_[to_lower(trim(line.substr(0, tab)))] = to_lower(trim(line.substr(tab + 1)));
        }
        return s;
    }

    std::string standardize(std::string_view raw, const ExternalResolver* resolver = nullptr) const {
        if (trim(raw).empty()) throw ValidationError("standardize: empty ingredient string");

        std::vector<std::string> kept;
        for (const auto& token : tokenize(raw)) {
            if (is_quantity(token)) continue;
            if (units_.count(token) != 0 || units_.count(singularize(token)) != 0) continue;
            if (modifiers_.count(token) != 0) continue;
            kept.push_back(token);
        }

        if (kept.empty()) {
            // rules could not resolve this phrase; defer to the resolver if any
            if (resolver != nullptr) {
                std::string resolved = to_lower(trim(resolver->resolve(raw)));
                if (resolved.empty())
                    throw ValidationError("resolver returned empty canonical name for: " +
                                          std::string(raw));
                return resolved;
            }
            throw ValidationError("unresolvable ingredient string: " + std::string(raw));
        }

        std::string phrase;
        for (const auto& t : kept) {
            if (!phrase.empty()) phrase.push_back(' ');
            phrase += t;
        }
        auto syn = synonyms_.find(phrase);
        if (syn != synonyms_.end()) phrase = syn->second;

        // singularize the head (last) word
        auto space = phrase.rfind(' ');
        std::string last = space == std::string::npos ? phrase : phrase.substr(space + 1);
        std::string singular = singularize(last);
        if (singular != last)
            phrase = (space == std::string::npos ? "" : phrase.substr(0, space + 1)) + singular;
        return phrase;
    }

    bool is_unit_token(std::string_view token) const {
        std::string t = to_lower(token);
        return units_.count(t) != 0 || units_.count(singularize(t)) != 0;
    }

    const std::unordered_set<std::string>& units() const { return units_; }
    const std::unordered_set<std::string>& modifiers() const { return modifiers_; }

private:
    std::unordered_set<std::string> units_;
    std::unordered_set<std::string> modifiers_;
    std::unordered_set<std::string> singular_exceptions_;
    std::map<std::string, std::string> synonyms_;

    static bool is_quantity(const std::string& token) {
        // pure digits; mixed digit-letter forms like "100g" were split by the
        // tokenizer already, so a digit anywhere marks a quantity token
        for (char c : token)
            if (std::isdigit(static_cast<unsigned char>(c))) return true;
        return false;
    }

    std::string singularize(std::string_view word) const {
        std::string w(word);
        if (singular_exceptions_.count(w) != 0) return w;
        auto ends_with = [&](std::string_view suffix) {
            return w.size() > suffix.size() &&
                   w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        if (ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
        if (ends_with("oes")) return w.substr(0, w.size() - 2);
        if (ends_with("ches") || ends_with("shes") || ends_with("sses") || ends_with("xes") ||
            ends_with("zes"))
            return w.substr(0, w.size() - 2);
        if (ends_with("s") && !ends_with("ss") && !ends_with("us") && !ends_with("is"))
            return w.substr(0, w.size() - 1);
        return w;
    }

    static std::vector<std::string> read_lines(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read lexicon file: " + path.string());
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            lines.push_back(s);
        }
        return lines;
    }

    static std::unordered_set<std::string> read_token_set(const std::filesystem::path& path) {
        std::unordered_set<std::string> out;
        for (const auto& line : read_lines(path)) out.insert(to_lower(line));
        return out;
    }
};

} // namespace mmkg
