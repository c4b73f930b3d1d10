#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fuzzformer::data {

struct Observation {
    std::string date;  // YYYY-MM-DD
    double value = 0.0;
};

struct RawSeries {
    std::string name;
    std::vector<Observation> observations;

    std::size_t size() const { return observations.size(); }
};

/// Parses `date,value` CSV text (header required). Rows are sorted by date;
/// duplicates, malformed dates and non-finite values raise DataError with the
/// offending line number.
RawSeries parse_csv(const std::string& text, const std::string& name);
RawSeries load_csv(const std::filesystem::path& path);
void write_csv(const RawSeries& series, const std::filesystem::path& path);

/// Row-major T x D matrix of observations on a shared calendar.
struct AlignedSeries {
    std::vector<std::string> channels;
    std::vector<std::string> dates;
    std::vector<double> values;

    std::size_t rows() const { return dates.size(); }
    std::size_t cols() const { return channels.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }
};

/// Aligns every series onto the first (main) series' calendar. Other channels
/// are forward-filled; leading dates where any channel has no value yet are
/// dropped.
AlignedSeries align(std::span<const RawSeries> series);

struct RowRange {
    std::size_t begin = 0;  // inclusive
    std::size_t end = 0;    // exclusive
};

struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;

    double apply(std::size_t channel, double x) const;
    double inverse(std::size_t channel, double x) const;
};

/// Wide CSV: header `date,<channel>,...`, one row per date, values in original units.
std::string format_wide_csv(const AlignedSeries& aligned);
AlignedSeries parse_wide_csv(const std::string& text, const std::string& origin = "window");
void write_wide_csv(const AlignedSeries& aligned, const std::filesystem::path& path);
AlignedSeries load_wide_csv(const std::filesystem::path& path);

/// Per-channel statistics over `fit_range` of a row-major matrix with `cols` columns.
ScalerParams fit_minmax(std::span<const double> matrix, std::size_t cols, RowRange fit_range);
std::vector<double> apply_minmax(std::span<const double> matrix, const ScalerParams& scaler);
std::vector<double> inverse_minmax(std::span<const double> matrix, const ScalerParams& scaler);

struct ScaledMatrix {
    std::vector<double> values;
    ScalerParams scaler;
};

ScaledMatrix fit_apply_minmax(std::span<const double> matrix, std::size_t cols, RowRange fit_range);

enum class Split : std::uint8_t { train, valid, test };
const char* split_name(Split split);
Split parse_split(const std::string& name);

struct Sample {
    std::size_t start = 0;  // first input row; targets start at start + N
    Split split = Split::train;
};

struct WindowPlan {
    std::size_t window = 0;
    std::size_t horizon = 0;
    std::size_t stride = 1;
    std::vector<Sample> samples;
    /// Candidate windows dropped because their targets reach into a later split.
    std::size_t embargoed = 0;

    std::vector<std::size_t> indices(Split split) const;
    /// Rows touched by training samples (inputs and targets).
    RowRange training_rows() const;
};

/// Sliding windows over `rows` rows, split 80/10/10 by origin order. Samples
/// whose targets overlap the first input row of the next split are dropped.
WindowPlan plan_windows(std::size_t rows, std::size_t window, std::size_t horizon, std::size_t stride = 1);

/// A scaled, windowed view of an aligned matrix. Channel 0 is the main series.
struct WindowedDataset {
    std::vector<std::string> channels;
    std::vector<std::string> dates;
    std::vector<double> scaled;  // T x D, row-major
    ScalerParams scaler;
    WindowPlan plan;

    std::size_t rows() const { return dates.size(); }
    std::size_t cols() const { return channels.size(); }
    std::size_t window() const { return plan.window; }
    std::size_t horizon() const { return plan.horizon; }

    /// N x D input block, row-major.
    std::vector<double> input(const Sample& sample) const;
    /// H main-series values following the input block.
    std::vector<double> target(const Sample& sample) const;
    std::vector<Sample> samples(Split split) const;
};

/// Windows an aligned matrix and scales it with statistics from the training rows only.
WindowedDataset make_windows(const AlignedSeries& aligned, std::size_t window, std::size_t horizon,
                             std::size_t stride = 1);

/// Versioned text serialization; identical datasets produce identical bytes.
std::string serialize(const WindowedDataset& dataset);
WindowedDataset deserialize(const std::string& text);
void save_dataset(const WindowedDataset& dataset, const std::filesystem::path& path);
WindowedDataset load_dataset(const std::filesystem::path& path);

// ---- manifest ---------------------------------------------------------

struct ManifestEntry {
    std::string name;
    std::string source;  // file path or URL
    std::string role;    // "main" or "exogenous"
    std::string first_date;
    std::string last_date;
};

struct Manifest {
    std::vector<ManifestEntry> channels;
};

/// JSON manifest; relative sources resolve against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// ---- synthetic data ---------------------------------------------------

struct SyntheticOptions {
    std::size_t rows = 1600;
    std::uint64_t seed = 7;
    double period = 50.0;
    double amplitude = 1.0;
    double trend = 0.002;
    double ar1 = 0.5;
    double ar2 = -0.2;
    double noise = 0.05;
    std::string start_date = "2000-01-03";
};

/// Main channel: sinusoid + linear trend + AR(2) noise. Second channel: a
/// lagged cosine of the same period with independent white noise.
std::vector<RawSeries> synthetic_series(const SyntheticOptions& options);

/// Writes the synthetic series as CSV files plus a manifest; returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticOptions& options, const std::filesystem::path& directory);

}  // namespace fuzzformer::data
