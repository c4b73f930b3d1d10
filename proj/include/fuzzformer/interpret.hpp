#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fuzzformer/checkpoint.hpp"
#include "fuzzformer/data.hpp"
#include "fuzzformer/fuzzy.hpp"
#include "fuzzformer/training.hpp"

namespace fuzzformer::interpret {

/// Everything the forecast command exports for one input window.
struct ForecastBundle {
    std::size_t window = 0;
    std::size_t horizon = 0;
    std::vector<std::string> channels;
    std::vector<std::string> input_dates;  // N
    std::vector<double> history_scaled;    // main channel, N
    std::vector<double> history;           // main channel, original units
    std::vector<double> forecast_scaled;   // H
    std::vector<double> forecast;          // H, original units
    std::vector<double> memberships;       // C
    std::size_t winner = 0;
    std::vector<std::vector<double>> rule_forecasts_scaled;  // C x H
    std::vector<std::vector<double>> rule_forecasts;         // C x H, original units
    std::vector<double> latent;                              // D_Z
    std::vector<fuzzy::GaussianCluster> clusters;
    std::vector<std::vector<double>> bhattacharyya;  // C x C
    /// attention[layer][head] is N x N row-major; rows are query steps.
    std::vector<std::vector<std::vector<double>>> attention;
};

/// Runs the checkpoint on the last N rows of `raw` (original units). Channels
/// are matched by name; extra columns are ignored.
ForecastBundle explain(const Checkpoint& checkpoint, const data::AlignedSeries& raw);

/// forecast.csv, history.csv, rules.csv, clusters.csv, latent.csv,
/// bhattacharyya.csv, attention.csv and the forecast/clusters/attention SVGs.
void write_bundle(const ForecastBundle& bundle, const std::filesystem::path& dir);

std::string loss_csv_header();
std::string loss_csv_row(const training::EpochLog& log);
std::string loss_svg(const std::vector<training::EpochLog>& history);

/// Per-sample forecasts and targets in long form: start,step,forecast,target.
std::string forecasts_csv(const training::Evaluation& evaluation);
std::string step_rmse_csv(const training::Evaluation& evaluation);

}  // namespace fuzzformer::interpret
