#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fuzzformer/data.hpp"
#include "fuzzformer/model.hpp"
#include "fuzzformer/training.hpp"

namespace fuzzformer {

/// Everything a training run needs besides the data. Serialized as a flat JSON
/// object whose keys are also the CLI flag names (`--hidden 16`, ...).
///
/// window, horizon and input_dim may be left at 0 and are then taken from the
/// dataset by `resolve`.
struct RunConfig {
    ModelConfig model;
    training::TrainOptions train;
    std::string dataset;  // prepared dataset file
    std::string output;   // run directory

    RunConfig();

    /// Fills 0-valued extents from the dataset and rejects mismatches.
    void resolve(const data::WindowedDataset& dataset);
    void validate() const;
};

/// Field names accepted in config files, in serialization order.
const std::vector<std::string>& run_config_keys();

nlohmann::json to_json(const RunConfig& config);
/// Unknown keys and wrongly typed values raise ConfigError; absent keys keep defaults.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

/// Model and optimization fields only: paths are left out so that identical
/// runs written to different directories serialize identically.
nlohmann::json hyperparameters_json(const RunConfig& config);

}  // namespace fuzzformer
