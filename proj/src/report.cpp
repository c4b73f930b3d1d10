#include "fuzzformer/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "fuzzformer/error.hpp"

namespace fuzzformer::report {

namespace {

constexpr const char* kHeader = "method,config,setting,split,rmse";
constexpr const char* kMissing = "—";
const char* const kSplitNames[Table::kSplits] = {"train", "valid", "test"};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cell);
            cell.clear();
        } else {
            cell += ch;
        }
    }
    out.push_back(cell);
    return out;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string format_rmse(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_cell(const std::optional<double>& v) {
    if (!v) return kMissing;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

std::size_t split_index(const std::string& split) {
    for (std::size_t i = 0; i < Table::kSplits; ++i) {
        if (split == kSplitNames[i]) return i;
    }
    throw DataError("report: inconsistent split label '" + split + "' (expected train, valid or test)");
}

// Display width in code points, so "—" counts as one column.
std::size_t display_width(const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

}  // namespace

std::string setting_label(std::size_t window, std::size_t horizon) {
    return std::to_string(window) + "/" + std::to_string(horizon);
}

std::vector<ResultRow> parse_results(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != kHeader) throw DataError(origin + ": expected header '" + kHeader + "'");
            continue;
        }
        const auto cells = split_csv_line(line);
        const auto where = origin + ":" + std::to_string(line_no);
        if (cells.size() != 5) throw DataError(where + ": expected 5 columns");
        ResultRow r{cells[0], cells[1], cells[2], cells[3], 0.0};
        char* end = nullptr;
        r.rmse = std::strtod(cells[4].c_str(), &end);
        if (cells[4].empty() || *end != '\0') throw DataError(where + ": bad rmse '" + cells[4] + "'");
        if (r.method.empty()) throw DataError(where + ": empty method");
        split_index(r.split);
        rows.push_back(std::move(r));
    }
    if (line_no == 0) throw DataError(origin + ": empty results file");
    return rows;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("report: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_results(buf.str(), path.string());
}

std::string format_results(const std::vector<ResultRow>& rows) {
    std::string out = std::string(kHeader) + "\n";
    for (const auto& r : rows) {
        out += quote(r.method) + "," + quote(r.config) + "," + quote(r.setting) + "," + quote(r.split) + "," +
               format_rmse(r.rmse) + "\n";
    }
    return out;
}

void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    out << format_results(rows);
    if (!out) throw DataError("report: cannot write " + path.string());
}

Table build_table(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw DataError("report: no result rows");
    Table t;
    std::map<std::string, std::size_t> row_index;
    std::map<std::string, std::size_t> setting_index;
    for (const auto& r : rows) {
        const std::string label = r.config.empty() ? r.method : r.method + " " + r.config;
        if (!row_index.count(label)) {
            row_index.emplace(label, t.row_labels.size());
            t.row_labels.push_back(label);
        }
        if (!setting_index.count(r.setting)) {
            setting_index.emplace(r.setting, t.settings.size());
            t.settings.push_back(r.setting);
        }
    }
    t.cells.assign(t.row_labels.size(), std::vector<std::optional<double>>(t.columns()));
    for (const auto& r : rows) {
        const std::string label = r.config.empty() ? r.method : r.method + " " + r.config;
        auto& cell = t.cells[row_index.at(label)][setting_index.at(r.setting) * Table::kSplits + split_index(r.split)];
        if (cell && *cell != r.rmse && !(std::isnan(*cell) && std::isnan(r.rmse))) {
            throw DataError("report: conflicting values for " + label + ", " + r.setting + ", " + r.split);
        }
        cell = r.rmse;
    }
    return t;
}

std::string render_text(const Table& t) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> top{""}, header{"method"};
    for (const auto& s : t.settings) {
        for (std::size_t i = 0; i < Table::kSplits; ++i) {
            top.push_back(i == 0 ? "N/H = " + s : "");
            header.push_back(kSplitNames[i]);
        }
    }
    grid.push_back(top);
    grid.push_back(header);
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        std::vector<std::string> line{t.row_labels[r]};
        for (const auto& c : t.cells[r]) line.push_back(format_cell(c));
        grid.push_back(line);
    }
    std::vector<std::size_t> width(grid[0].size(), 0);
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], display_width(line[c]));
    }
    std::string out;
    for (const auto& line : grid) {
        std::string text;
        for (std::size_t c = 0; c < line.size(); ++c) {
            const std::string pad(width[c] - display_width(line[c]), ' ');
            text += c == 0 ? line[c] + pad : "  " + pad + line[c];
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        out += text + "\n";
    }
    return out;
}

std::string render_csv(const Table& t) {
    std::string out = "method";
    for (const auto& s : t.settings) {
        for (const char* split : kSplitNames) out += "," + quote(s + " " + split);
    }
    out += "\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        out += quote(t.row_labels[r]);
        for (const auto& c : t.cells[r]) out += "," + format_cell(c);
        out += "\n";
    }
    return out;
}

}  // namespace fuzzformer::report
