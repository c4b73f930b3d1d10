#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fuzzformer/config.hpp"
#include "fuzzformer/data.hpp"
#include "fuzzformer/model.hpp"

namespace fuzzformer {

/// A trained model together with what is needed to use it on raw data.
/// Layout is described in docs/checkpoint-format.md.
struct Checkpoint {
    RunConfig config;  // paths are not stored
    std::vector<std::string> channels;
    data::ScalerParams scaler;
    std::size_t best_epoch = 0;
    double best_valid_rmse = 0.0;
    FuzzformerModel model;
};

Checkpoint make_checkpoint(const RunConfig& config, const data::WindowedDataset& dataset,
                           const FuzzformerModel& model, const training::TrainSummary& summary);

/// Byte-exact encoding; equal checkpoints give equal strings.
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError unless the dataset has the checkpoint's N, H and channels.
void check_compatible(const Checkpoint& checkpoint, const data::WindowedDataset& dataset);

}  // namespace fuzzformer
