#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bookrec/csv.hpp"

namespace bookrec {

/// Small table model for metric reports: one label column plus value columns,
/// serialized to CSV and to an aligned plain-text table. Rendering is
/// deterministic so regenerated reports are byte-identical.
struct MetricReport {
    std::string title;
    std::string label_header = "row";
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;

    void add_row(std::string label, std::vector<std::string> cells) {
        if (cells.size() != columns.size())
            throw ValidationError("metric report '" + title + "': row '" + label + "' has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(columns.size()));
        rows.emplace_back(std::move(label), std::move(cells));
    }

    std::string to_csv() const {
        std::vector<std::string> header;
        header.push_back(label_header);
        header.insert(header.end(), columns.begin(), columns.end());
        std::vector<std::vector<std::string>> body;
        body.reserve(rows.size());
        for (const auto& [label, cells] : rows) {
            std::vector<std::string> row;
            row.push_back(label);
            row.insert(row.end(), cells.begin(), cells.end());
            body.push_back(std::move(row));
        }
        return render_csv(header, body);
    }

    std::string to_text() const {
        std::vector<std::size_t> widths;
        widths.push_back(utf8_length(label_header));
        for (const auto& c : columns) widths.push_back(utf8_length(c));
        for (const auto& [label, cells] : rows) {
            widths[0] = std::max(widths[0], utf8_length(label));
            for (std::size_t i = 0; i < cells.size(); ++i)
                widths[i + 1] = std::max(widths[i + 1], utf8_length(cells[i]));
        }
        auto pad = [](const std::string& s, std::size_t w) {
            std::string out = s;
            std::size_t len = utf8_length(s);
            while (len++ < w) out += ' ';
            return out;
        };
        std::ostringstream out;
        if (!title.empty()) out << title << '\n';
        out << pad(label_header, widths[0]);
        for (std::size_t i = 0; i < columns.size(); ++i)
            out << "  " << pad(columns[i], widths[i + 1]);
        out << '\n';
        std::size_t total = widths[0];
        for (std::size_t i = 1; i < widths.size(); ++i) total += 2 + widths[i];
        out << std::string(total, '-') << '\n';
        for (const auto& [label, cells] : rows) {
            out << pad(label, widths[0]);
            for (std::size_t i = 0; i < cells.size(); ++i)
                out << "  " << pad(cells[i], widths[i + 1]);
            out << '\n';
        }
        return out.str();
    }
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Fixed-precision cell renderers shared by all reports.
inline std::string metric_cell(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

inline std::string score_cell(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace bookrec
