#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/compute/tensor.hpp"
#include "fuzzformer/encoder.hpp"
#include "fuzzformer/fuzzy.hpp"

namespace fuzzformer {

struct ModelConfig {
    encoder::EncoderConfig encoder;
    std::size_t rules = 16;
    std::size_t ar_order = 30;
    std::size_t exo_order = 1;
    int integration = 1;
    double covariance_epsilon = fuzzy::kCovarianceFloor;
    /// Initial cluster spread: covariances start at (spread^2) I.
    double initial_spread = 0.5;

    std::size_t history_length() const { return ar_order + static_cast<std::size_t>(integration); }
    void validate() const;
};

/// Model inputs for B windows. `history` holds the trailing p + d values of
/// the main channel; `targets` may be empty when only forecasting.
struct Batch {
    compute::Tensor windows;  // [B, N, D_X]
    compute::Tensor history;  // [B, p + d]
    compute::Tensor targets;  // [B, H] or null

    std::size_t size() const { return windows->dim(0); }
};

/// Builds a batch from raw windows; the main series is channel 0.
Batch make_batch(std::span<const std::vector<double>> windows, std::span<const std::vector<double>> targets,
                 const ModelConfig& config);

struct ForwardOptions {
    bool dropout = false;
    /// Forecast only through each sample's most activated rule.
    bool winner_takes_all = false;
    compute::Rng* rng = nullptr;

    static ForwardOptions training(compute::Rng& rng) { return {true, true, &rng}; }
    static ForwardOptions evaluation() { return {}; }
};

struct ForwardResult {
    encoder::EncoderOutput encoding;
    compute::Tensor covariances;     // [C, D_Z, D_Z]
    compute::Tensor distances_sq;    // [B, C] Mahalanobis
    compute::Tensor memberships;     // [B, C]
    std::vector<std::size_t> winners;
    compute::Tensor rule_forecasts;  // [B, C, H]; null under winner-takes-all
    compute::Tensor forecast;        // [B, H]
};

class FuzzformerModel {
public:
    static FuzzformerModel create(const ModelConfig& config, compute::Rng& rng);

    ForwardResult forward(const Batch& batch, const ForwardOptions& options) const;

    /// Places cluster centers on the latents of the given windows (one window
    /// per rule, evaluated without dropout) and resets covariances.
    void initialize_clusters(const Batch& warmup);

    std::vector<fuzzy::GaussianCluster> clusters() const;

    const ModelConfig& config() const { return config_; }
    std::vector<std::pair<std::string, compute::Tensor>> named_parameters() const;
    std::vector<compute::Tensor> parameters() const;

    encoder::EncoderParams encoder;
    compute::Tensor centers;  // [C, D_Z]
    compute::Tensor factors;  // [C, D_Z, D_Z]
    compute::Tensor ar;       // [C, p]
    compute::Tensor exo;      // [C, q]

private:
    ModelConfig config_;
};

}  // namespace fuzzformer
