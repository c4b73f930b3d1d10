#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fuzzformer::report {

/// One line of a results file: `method,config,setting,split,rmse`.
/// `setting` is the window/horizon pair written as "N/H".
struct ResultRow {
    std::string method;
    std::string config;
    std::string setting;
    std::string split;
    double rmse = 0.0;
};

std::string setting_label(std::size_t window, std::size_t horizon);

std::vector<ResultRow> parse_results(const std::string& text, const std::string& origin = "results");
std::vector<ResultRow> read_results(const std::filesystem::path& path);
std::string format_results(const std::vector<ResultRow>& rows);
void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

/// Methods as rows; (setting x {train, valid, test}) as columns, settings in
/// order of first appearance. Split labels other than train/valid/test and
/// conflicting duplicate cells raise DataError.
struct Table {
    std::vector<std::string> row_labels;  // "method config"
    std::vector<std::string> settings;
    static constexpr std::size_t kSplits = 3;
    /// cells[r][s * 3 + split]
    std::vector<std::vector<std::optional<double>>> cells;

    std::size_t columns() const { return settings.size() * kSplits; }
};

Table build_table(const std::vector<ResultRow>& rows);

/// Aligned plain-text rendering; missing cells show as "—".
std::string render_text(const Table& table);
/// Same layout as CSV; missing cells show as "—".
std::string render_csv(const Table& table);

}  // namespace fuzzformer::report
