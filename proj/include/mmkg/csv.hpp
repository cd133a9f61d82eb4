#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mmkg/errors.hpp"

namespace mmkg::csv {

/// Split one CSV record into fields. Handles quoted fields, embedded commas,
/// and doubled-quote escapes. Newlines inside quoted fields are not supported;
/// records are one per line.
inline std::vector<std::string> parse_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r' && i + 1 == line.size()) {
            // tolerate CRLF
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows; // same arity as header
};

/// Read a whole CSV file with a header row. Rows with a different field count
/// than the header are returned as-is; callers decide how to reject them.
inline Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read CSV file: " + path.string());
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            t.header = parse_line(line);
            first = false;
            continue;
        }
        if (line.empty()) continue;
        t.rows.push_back(parse_line(line));
    }
    if (first) throw ParseError("CSV file has no header row: " + path.string(), 1);
    return t;
}

inline int column_index(const Table& t, const std::string& name) {
    for (size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return static_cast<int>(i);
    return -1;
}

} // namespace mmkg::csv
