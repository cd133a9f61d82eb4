#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mmkg/errors.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

/// Runtime defaults shared by every pipeline stage. A config file overrides
/// the built-ins; command-line flags override the file.
///
/// File format: `key = value` per line, `#` starts a comment.
struct Config {
    double dedupe_threshold = 0.95;   // dedupe.threshold
    double mismatch_threshold = 0.30; // mismatch.threshold
    double match_threshold = 0.85;    // hallucination.match_threshold
    double halluc_threshold = 0.60;   // hallucination.halluc_threshold
    double tau = 0.5;                 // router.tau
    int diversity_k = 50;             // diversity.k
    std::uint64_t seed = 42;          // seed
    unsigned jobs = 1;                // jobs
    double mock_retrieval_latency = 0.15;  // router.mock_retrieval_latency (seconds)
    double mock_generation_latency = 6.8;  // router.mock_generation_latency (seconds)

    static Config defaults() { return {}; }

    void set(const std::string& key, const std::string& value) {
        try {
            if (key == "dedupe.threshold") dedupe_threshold = std::stod(value);
            else if (key == "mismatch.threshold") mismatch_threshold = std::stod(value);
            else if (key == "hallucination.match_threshold") match_threshold = std::stod(value);
            else if (key == "hallucination.halluc_threshold") halluc_threshold = std::stod(value);
            else if (key == "router.tau") tau = std::stod(value);
            else if (key == "diversity.k") diversity_k = std::stoi(value);
            else if (key == "seed") seed = std::stoull(value);
            else if (key == "jobs") jobs = static_cast<unsigned>(std::stoul(value));
            else if (key == "router.mock_retrieval_latency") mock_retrieval_latency = std::stod(value);
            else if (key == "router.mock_generation_latency") mock_generation_latency = std::stod(value);
            else throw ValidationError("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw ValidationError("bad value for config key " + key + ": " + value);
        } catch (const std::out_of_range&) {
            throw ValidationError("bad value for config key " + key + ": " + value);
        }
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read config file: " + path.string());
        Config cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ParseError("config line is not `key = value`: " + s, lineno);
            cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
        }
        return cfg;
    }

    /// Defaults, unless MMKG_CONFIG names a config file.
    static Config from_env() {
        const char* p = std::getenv("MMKG_CONFIG");
        if (p != nullptr && *p != '\0') return load(p);
        return defaults();
    }
};

} // namespace mmkg
