#include "doctest.h"

#include <cmath>

#include "fuzzformer/error.hpp"
#include "fuzzformer/report.hpp"
#include "support/temp_dir.hpp"

using namespace fuzzformer;
using namespace fuzzformer::report;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_of(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto at = s.find(needle); at != std::string::npos; at = s.find(needle, at + needle.size())) ++n;
    return n;
}

}  // namespace

TEST_CASE("results files round trip") {
    std::vector<ResultRow> rows{{"Fuzzformer", "C=16,D_h=128,p=30", "60/30", "test", 0.0321},
                                {"ARIMA(4,1,1)", "", "60/30", "valid", 0.1 / 3.0}};
    const auto back = parse_results(format_results(rows));
    REQUIRE(back.size() == 2);
    CHECK(back[0].config == "C=16,D_h=128,p=30");
    CHECK(back[1].rmse == rows[1].rmse);
    testing::TempDir dir;
    write_results(dir.path() / "r.csv", rows);
    CHECK(read_results(dir.path() / "r.csv").size() == 2);

    CHECK_THROWS_AS(parse_results("method,split,rmse\n"), DataError);
    CHECK_THROWS_AS(parse_results("method,config,setting,split,rmse\nA,,60/30,test\n"), DataError);
    CHECK_THROWS_AS(parse_results("method,config,setting,split,rmse\nA,,60/30,test,abc\n"), DataError);
    CHECK_THROWS_AS(parse_results("method,config,setting,split,rmse\nA,,60/30,testing,0.1\n"), DataError);
    CHECK(setting_label(60, 30) == "60/30");
}

TEST_CASE("single method and setting gives a 1 x 3 table") {
    std::vector<ResultRow> rows{{"Fuzzformer", "", "60/30", "train", 0.0095},
                                {"Fuzzformer", "", "60/30", "valid", 0.0300},
                                {"Fuzzformer", "", "60/30", "test", 0.0321}};
    const auto t = build_table(rows);
    CHECK(t.row_labels.size() == 1);
    CHECK(t.columns() == 3);
    CHECK(*t.cells[0][0] == 0.0095);
    CHECK(*t.cells[0][2] == 0.0321);
    const auto text = render_text(t);
    CHECK(text.find("0.0321") != std::string::npos);
    CHECK(count_lines(render_csv(t)) == 2);
}

TEST_CASE("three methods by three settings give a 3 x 9 grid") {
    std::vector<ResultRow> rows;
    const char* methods[] = {"ARIMA(4,1,1)", "LSTM", "Fuzzformer"};
    const char* settings[] = {"60/30", "30/15", "120/60"};
    const char* splits[] = {"test", "train", "valid"};
    double v = 0.01;
    for (auto s : settings) {
        for (auto m : methods) {
            for (auto sp : splits) rows.push_back({m, "", s, sp, v += 0.001});
        }
    }
    const auto t = build_table(rows);
    CHECK(t.row_labels.size() == 3);
    CHECK(t.columns() == 9);
    CHECK(t.settings == std::vector<std::string>{"60/30", "30/15", "120/60"});
    for (const auto& row : t.cells) {
        for (const auto& c : row) CHECK(c.has_value());
    }
    // column order is (setting, train/valid/test) regardless of input order
    CHECK(*t.cells[0][0] == doctest::Approx(0.012));
    CHECK(*t.cells[0][2] == doctest::Approx(0.011));
    const auto csv = render_csv(t);
    CHECK(count_lines(csv) == 4);
    CHECK(csv.rfind("method,60/30 train,60/30 valid,60/30 test,30/15 train", 0) == 0);
}

TEST_CASE("missing cells render as a dash") {
    std::vector<ResultRow> rows{{"Fuzzformer", "", "60/30", "test", 0.03}, {"LSTM", "", "60/30", "valid", 0.04}};
    const auto t = build_table(rows);
    CHECK_FALSE(t.cells[0][1].has_value());
    const auto text = render_text(t);
    CHECK(count_of(text, "—") == 4);
    CHECK(count_of(render_csv(t), "—") == 4);
}

TEST_CASE("inconsistent labels and conflicting cells are errors") {
    std::vector<ResultRow> bad_split{{"A", "", "60/30", "validation", 0.1}};
    CHECK_THROWS_AS(build_table(bad_split), DataError);
    std::vector<ResultRow> conflict{{"A", "", "60/30", "test", 0.1}, {"A", "", "60/30", "test", 0.2}};
    CHECK_THROWS_AS(build_table(conflict), DataError);
    std::vector<ResultRow> repeat{{"A", "", "60/30", "test", 0.1}, {"A", "", "60/30", "test", 0.1}};
    CHECK(build_table(repeat).row_labels.size() == 1);
    CHECK_THROWS_AS(build_table({}), DataError);
}
