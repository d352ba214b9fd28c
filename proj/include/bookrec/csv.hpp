#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bookrec/common.hpp"

namespace bookrec {

/// Parsed CSV file: header row plus data rows, with the 1-based source line
/// number kept per row so loaders can name it in error messages.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ValidationError("csv: no column named '" + name + "'");
    }
};

namespace detail {

// RFC-4180 style: fields may be quoted, quotes escape as "". Newlines inside
// quoted fields are allowed.
inline CsvTable parse_csv(std::string_view text, const std::string& origin) {
    CsvTable table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t line = 1;
    std::size_t row_start_line = 1;
    bool any_char_in_row = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        if (table.header.empty()) {
            table.header = row;
        } else {
            table.rows.push_back(row);
            table.line_numbers.push_back(row_start_line);
        }
        row.clear();
        any_char_in_row = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field.empty() || field_was_quoted)
                throw ValidationError(origin + ": line " + std::to_string(line) +
                                      ": stray quote inside unquoted field");
            in_quotes = true;
            field_was_quoted = true;
            any_char_in_row = true;
            break;
        case ',':
            end_field();
            any_char_in_row = true;
            break;
        case '\r':
            break;
        case '\n':
            if (any_char_in_row || !row.empty() || !field.empty()) end_row();
            ++line;
            row_start_line = line;
            break;
        default:
            field += c;
            any_char_in_row = true;
            break;
        }
    }
    if (in_quotes)
        throw ValidationError(origin + ": line " + std::to_string(row_start_line) +
                              ": unterminated quoted field");
    if (any_char_in_row || !row.empty() || !field.empty()) end_row();
    return table;
}

inline std::string csv_escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open csv file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    CsvTable table = detail::parse_csv(buf.str(), path);
    if (table.header.empty() && !buf.str().empty())
        throw ValidationError(path + ": missing header row");
    return table;
}

inline std::string render_csv(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << detail::csv_escape(header[i]);
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << detail::csv_escape(row[i]);
        }
        out << '\n';
    }
    return out.str();
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write csv file: " + path);
    out << render_csv(header, rows);
    if (!out) throw IoError("write failed: " + path);
}

} // namespace bookrec
