#include "fuzzformer/data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/error.hpp"

namespace fuzzformer::data {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

constexpr const char* kDatasetMagic = "FUZZFORMER-DATASET 1";

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::optional<std::chrono::year_month_day> parse_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

std::string format_date(std::chrono::year_month_day ymd) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) throw DataError(context + ": cannot parse number '" + t + "'");
    return v;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << contents;
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

RawSeries parse_csv(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    RawSeries series{name, {}};
    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = trim(line);
        if (row.empty()) continue;
        if (!header_seen) {
            if (row != "date,value") {
                throw DataError(name + ": line " + std::to_string(line_no) + ": expected header 'date,value'");
            }
            header_seen = true;
            continue;
        }
        const auto comma = row.find(',');
        if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos) {
            throw DataError(name + ": line " + std::to_string(line_no) + ": expected two fields");
        }
        const std::string date = trim(row.substr(0, comma));
        if (!parse_date(date)) {
            throw DataError(name + ": line " + std::to_string(line_no) + ": invalid date '" + date + "'");
        }
        const std::string where = name + ": line " + std::to_string(line_no);
        const double value = parse_double(row.substr(comma + 1), where);
        if (!std::isfinite(value)) throw DataError(where + ": non-finite value");
        series.observations.push_back({date, value});
    }
    if (!header_seen) throw DataError(name + ": empty file");
    std::stable_sort(series.observations.begin(), series.observations.end(),
                     [](const Observation& a, const Observation& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < series.observations.size(); ++i) {
        if (series.observations[i].date == series.observations[i - 1].date) {
            throw DataError(name + ": duplicate date " + series.observations[i].date);
        }
    }
    return series;
}

RawSeries load_csv(const fs::path& path) { return parse_csv(read_file(path), path.stem().string()); }

void write_csv(const RawSeries& series, const fs::path& path) {
    std::string out = "date,value\n";
    for (const auto& obs : series.observations) out += obs.date + "," + format_double(obs.value) + "\n";
    write_file(path, out);
}

AlignedSeries align(std::span<const RawSeries> series) {
    if (series.empty()) throw DataError("align: no series given");
    const RawSeries& main = series.front();
    AlignedSeries out;
    for (const auto& s : series) out.channels.push_back(s.name);
    const std::size_t cols = series.size();
    std::vector<std::size_t> cursor(cols, 0);
    std::vector<double> last(cols, 0.0);
    std::vector<bool> seen(cols, false);
    for (const auto& obs : main.observations) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& rows = series[c].observations;
            while (cursor[c] < rows.size() && rows[cursor[c]].date <= obs.date) {
                last[c] = rows[cursor[c]].value;
                seen[c] = true;
                ++cursor[c];
            }
        }
        if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) continue;
        out.dates.push_back(obs.date);
        out.values.insert(out.values.end(), last.begin(), last.end());
    }
    if (out.dates.empty()) throw DataError("align: series share no overlapping dates");
    return out;
}

std::string format_wide_csv(const AlignedSeries& aligned) {
    std::string out = "date";
    for (const auto& c : aligned.channels) out += "," + c;
    out += "\n";
    for (std::size_t r = 0; r < aligned.rows(); ++r) {
        out += aligned.dates[r];
        for (std::size_t c = 0; c < aligned.cols(); ++c) out += "," + format_double(aligned.at(r, c));
        out += "\n";
    }
    return out;
}

AlignedSeries parse_wide_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    AlignedSeries out;
    bool header_seen = false;
    auto cells_of = [](const std::string& row) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(row);
        while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
        if (!row.empty() && row.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = trim(line);
        if (row.empty()) continue;
        const auto cells = cells_of(row);
        const std::string where = origin + ": line " + std::to_string(line_no);
        if (!header_seen) {
            if (cells.size() < 2 || cells[0] != "date") throw DataError(where + ": expected header 'date,<channel>,...'");
            out.channels.assign(cells.begin() + 1, cells.end());
            for (const auto& c : out.channels) {
                if (c.empty()) throw DataError(where + ": empty channel name");
            }
            header_seen = true;
            continue;
        }
        if (cells.size() != out.channels.size() + 1) throw DataError(where + ": wrong number of fields");
        if (!parse_date(cells[0])) throw DataError(where + ": invalid date '" + cells[0] + "'");
        if (!out.dates.empty() && cells[0] <= out.dates.back()) throw DataError(where + ": dates must increase");
        out.dates.push_back(cells[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const double v = parse_double(cells[c], where);
            if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
            out.values.push_back(v);
        }
    }
    if (!header_seen) throw DataError(origin + ": empty file");
    return out;
}

void write_wide_csv(const AlignedSeries& aligned, const fs::path& path) { write_file(path, format_wide_csv(aligned)); }

AlignedSeries load_wide_csv(const fs::path& path) { return parse_wide_csv(read_file(path), path.string()); }

double ScalerParams::apply(std::size_t channel, double x) const {
    return (x - min[channel]) / (max[channel] - min[channel]);
}

double ScalerParams::inverse(std::size_t channel, double x) const {
    return x * (max[channel] - min[channel]) + min[channel];
}

ScalerParams fit_minmax(std::span<const double> matrix, std::size_t cols, RowRange fit_range) {
    if (cols == 0 || matrix.size() % cols != 0) throw DataError("fit_minmax: matrix width mismatch");
    const std::size_t rows = matrix.size() / cols;
    if (fit_range.begin >= fit_range.end || fit_range.end > rows) {
        throw DataError("fit_minmax: fit range [" + std::to_string(fit_range.begin) + ", " +
                        std::to_string(fit_range.end) + ") is empty or exceeds " + std::to_string(rows) + " rows");
    }
    ScalerParams p{std::vector<double>(cols), std::vector<double>(cols)};
    for (std::size_t c = 0; c < cols; ++c) {
        double lo = matrix[fit_range.begin * cols + c];
        double hi = lo;
        for (std::size_t r = fit_range.begin; r < fit_range.end; ++r) {
            lo = std::min(lo, matrix[r * cols + c]);
            hi = std::max(hi, matrix[r * cols + c]);
        }
        if (!(hi > lo)) throw DataError("fit_minmax: channel " + std::to_string(c) + " is constant on the fit range");
        p.min[c] = lo;
        p.max[c] = hi;
    }
    return p;
}

std::vector<double> apply_minmax(std::span<const double> matrix, const ScalerParams& scaler) {
    const std::size_t cols = scaler.min.size();
    std::vector<double> out(matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i) out[i] = scaler.apply(i % cols, matrix[i]);
    return out;
}

std::vector<double> inverse_minmax(std::span<const double> matrix, const ScalerParams& scaler) {
    const std::size_t cols = scaler.min.size();
    std::vector<double> out(matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i) out[i] = scaler.inverse(i % cols, matrix[i]);
    return out;
}

ScaledMatrix fit_apply_minmax(std::span<const double> matrix, std::size_t cols, RowRange fit_range) {
    auto scaler = fit_minmax(matrix, cols, fit_range);
    return {apply_minmax(matrix, scaler), std::move(scaler)};
}

const char* split_name(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "valid") return Split::valid;
    if (name == "test") return Split::test;
    throw DataError("unknown split '" + name + "' (expected train, valid or test)");
}

std::vector<std::size_t> WindowPlan::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == split) out.push_back(i);
    return out;
}

RowRange WindowPlan::training_rows() const {
    RowRange range{0, 0};
    bool any = false;
    for (const auto& s : samples) {
        if (s.split != Split::train) continue;
        range.begin = any ? std::min(range.begin, s.start) : s.start;
        range.end = std::max(range.end, s.start + window + horizon);
        any = true;
    }
    if (!any) throw DataError("window plan has no training samples");
    return range;
}

WindowPlan plan_windows(std::size_t rows, std::size_t window, std::size_t horizon, std::size_t stride) {
    if (window == 0 || horizon == 0 || stride == 0) throw DataError("make_windows: N, H and stride must be positive");
    if (rows < window + horizon) {
        throw DataError("make_windows: " + std::to_string(rows) + " rows are fewer than N + H = " +
                        std::to_string(window + horizon));
    }
    const std::size_t candidates = (rows - window - horizon) / stride + 1;
    const std::size_t n_train = candidates * 8 / 10;
    const std::size_t n_valid = candidates / 10;
    WindowPlan plan{window, horizon, stride, {}, 0};
    auto split_of = [&](std::size_t i) {
        return i < n_train ? Split::train : (i < n_train + n_valid ? Split::valid : Split::test);
    };
    // First input row of each later split; targets may not reach it.
    auto first_start = [&](Split s) -> std::size_t {
        for (std::size_t i = 0; i < candidates; ++i)
            if (split_of(i) == s) return i * stride;
        return rows;
    };
    const std::size_t valid_start = first_start(Split::valid);
    const std::size_t test_start = first_start(Split::test);
    for (std::size_t i = 0; i < candidates; ++i) {
        const std::size_t start = i * stride;
        const Split split = split_of(i);
        const std::size_t last_target = start + window + horizon - 1;
        const bool leaks = (split == Split::train && last_target >= std::min(valid_start, test_start)) ||
                           (split == Split::valid && last_target >= test_start);
        if (leaks) {
            ++plan.embargoed;
            continue;
        }
        plan.samples.push_back({start, split});
    }
    return plan;
}

std::vector<double> WindowedDataset::input(const Sample& sample) const {
    const std::size_t d = cols();
    return {scaled.begin() + static_cast<std::ptrdiff_t>(sample.start * d),
            scaled.begin() + static_cast<std::ptrdiff_t>((sample.start + window()) * d)};
}

std::vector<double> WindowedDataset::target(const Sample& sample) const {
    std::vector<double> out(horizon());
    for (std::size_t j = 0; j < horizon(); ++j) out[j] = scaled[(sample.start + window() + j) * cols()];
    return out;
}

std::vector<Sample> WindowedDataset::samples(Split split) const {
    std::vector<Sample> out;
    for (const auto& s : plan.samples)
        if (s.split == split) out.push_back(s);
    return out;
}

WindowedDataset make_windows(const AlignedSeries& aligned, std::size_t window, std::size_t horizon,
                             std::size_t stride) {
    WindowedDataset ds;
    ds.channels = aligned.channels;
    ds.dates = aligned.dates;
    ds.plan = plan_windows(aligned.rows(), window, horizon, stride);
    auto scaled = fit_apply_minmax(aligned.values, aligned.cols(), ds.plan.training_rows());
    ds.scaled = std::move(scaled.values);
    ds.scaler = std::move(scaled.scaler);
    return ds;
}

std::string serialize(const WindowedDataset& ds) {
    std::string out = std::string(kDatasetMagic) + "\n";
    out += "window " + std::to_string(ds.window()) + " horizon " + std::to_string(ds.horizon()) + " stride " +
           std::to_string(ds.plan.stride) + " embargoed " + std::to_string(ds.plan.embargoed) + "\n";
    out += "channels " + std::to_string(ds.cols()) + "\n";
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        out += ds.channels[c] + " " + format_double(ds.scaler.min[c]) + " " + format_double(ds.scaler.max[c]) + "\n";
    }
    out += "rows " + std::to_string(ds.rows()) + "\n";
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        out += ds.dates[r];
        for (std::size_t c = 0; c < ds.cols(); ++c) out += " " + format_double(ds.scaled[r * ds.cols() + c]);
        out += "\n";
    }
    out += "samples " + std::to_string(ds.plan.samples.size()) + "\n";
    for (const auto& s : ds.plan.samples) out += std::to_string(s.start) + " " + split_name(s.split) + "\n";
    return out;
}

WindowedDataset deserialize(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kDatasetMagic) throw DataError("dataset cache: bad or unsupported version tag");
    WindowedDataset ds;
    std::string key;
    auto expect = [&](const char* want) {
        if (!(in >> key) || key != want) throw DataError(std::string("dataset cache: expected '") + want + "'");
    };
    expect("window");
    in >> ds.plan.window;
    expect("horizon");
    in >> ds.plan.horizon;
    expect("stride");
    in >> ds.plan.stride;
    expect("embargoed");
    in >> ds.plan.embargoed;
    std::size_t cols = 0, rows = 0, count = 0;
    expect("channels");
    in >> cols;
    std::string a, b, name;
    for (std::size_t c = 0; c < cols; ++c) {
        in >> name >> a >> b;
        ds.channels.push_back(name);
        ds.scaler.min.push_back(parse_double(a, "dataset cache"));
        ds.scaler.max.push_back(parse_double(b, "dataset cache"));
    }
    expect("rows");
    in >> rows;
    ds.dates.resize(rows);
    ds.scaled.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        in >> ds.dates[r];
        for (std::size_t c = 0; c < cols; ++c) {
            in >> a;
            ds.scaled[r * cols + c] = parse_double(a, "dataset cache");
        }
    }
    expect("samples");
    in >> count;
    for (std::size_t i = 0; i < count; ++i) {
        Sample s;
        in >> s.start >> a;
        s.split = parse_split(a);
        if (s.start + ds.window() + ds.horizon() > rows) throw DataError("dataset cache: sample exceeds rows");
        ds.plan.samples.push_back(s);
    }
    if (!in) throw DataError("dataset cache: truncated file");
    return ds;
}

void save_dataset(const WindowedDataset& dataset, const fs::path& path) { write_file(path, serialize(dataset)); }

WindowedDataset load_dataset(const fs::path& path) { return deserialize(read_file(path)); }

Manifest load_manifest(const fs::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw DataError("manifest " + path.string() + ": " + e.what());
    }
    Manifest m;
    if (!doc.contains("channels") || !doc["channels"].is_array() || doc["channels"].empty()) {
        throw DataError("manifest " + path.string() + ": missing 'channels' list");
    }
    for (const auto& entry : doc["channels"]) {
        ManifestEntry e;
        try {
            e.name = entry.at("name").get<std::string>();
            e.source = entry.at("source").get<std::string>();
            e.role = entry.value("role", std::string("exogenous"));
            e.first_date = entry.value("first_date", std::string());
            e.last_date = entry.value("last_date", std::string());
        } catch (const Json::exception& ex) {
            throw DataError("manifest " + path.string() + ": " + ex.what());
        }
        const bool remote = e.source.rfind("http://", 0) == 0 || e.source.rfind("https://", 0) == 0;
        if (!remote && fs::path(e.source).is_relative()) e.source = (path.parent_path() / e.source).string();
        m.channels.push_back(std::move(e));
    }
    if (m.channels.front().role != "main") throw DataError("manifest: the first channel must have role 'main'");
    for (std::size_t i = 1; i < m.channels.size(); ++i) {
        if (m.channels[i].role == "main") throw DataError("manifest: only one channel may have role 'main'");
    }
    return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
    Json doc;
    doc["channels"] = Json::array();
    for (const auto& e : manifest.channels) {
        doc["channels"].push_back({{"name", e.name},
                                   {"source", e.source},
                                   {"role", e.role},
                                   {"first_date", e.first_date},
                                   {"last_date", e.last_date}});
    }
    write_file(path, doc.dump(2) + "\n");
}

std::vector<RawSeries> synthetic_series(const SyntheticOptions& o) {
    if (o.rows == 0 || o.period <= 0.0) throw ConfigError("synthetic: rows and period must be positive");
    const auto start = parse_date(o.start_date);
    if (!start) throw ConfigError("synthetic: invalid start date '" + o.start_date + "'");
    compute::Rng rng(o.seed);
    RawSeries main{"synthetic_main", {}};
    RawSeries exo{"synthetic_exogenous", {}};
    const double omega = 2.0 * std::numbers::pi / o.period;
    double e1 = 0.0, e2 = 0.0;
    const std::chrono::sys_days day0{*start};
    for (std::size_t t = 0; t < o.rows; ++t) {
        const double noise = o.ar1 * e1 + o.ar2 * e2 + o.noise * rng.normal();
        e2 = e1;
        e1 = noise;
        const double td = static_cast<double>(t);
        const std::string date = format_date(std::chrono::year_month_day{day0 + std::chrono::days{t}});
        main.observations.push_back({date, o.amplitude * std::sin(omega * td) + o.trend * td + noise});
        // Leads the main channel by a tenth of a period.
        exo.observations.push_back({date, std::sin(omega * (td + 0.1 * o.period)) + o.noise * rng.normal()});
    }
    return {main, exo};
}

fs::path write_synthetic(const SyntheticOptions& options, const fs::path& directory) {
    fs::create_directories(directory);
    Manifest manifest;
    bool first = true;
    for (const auto& series : synthetic_series(options)) {
        const fs::path file = series.name + ".csv";
        write_csv(series, directory / file);
        manifest.channels.push_back({series.name, file.string(), first ? "main" : "exogenous",
                                     series.observations.front().date, series.observations.back().date});
        first = false;
    }
    const fs::path manifest_path = directory / "manifest.json";
    save_manifest(manifest, manifest_path);
    return manifest_path;
}

}  // namespace fuzzformer::data
