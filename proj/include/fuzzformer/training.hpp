#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fuzzformer/compute/adam.hpp"
#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/data.hpp"
#include "fuzzformer/losses.hpp"
#include "fuzzformer/model.hpp"

namespace fuzzformer::training {

struct TrainOptions {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    compute::AdamOptions adam;
    losses::LossWeights weights;
    std::uint64_t seed = 1;
};

/// Epoch means of the per-batch loss terms, plus validation RMSE (NaN when
/// the validation split is empty).
struct EpochLog {
    std::size_t epoch = 0;
    double mse = 0.0;
    double fcm = 0.0;
    double overlap = 0.0;
    double balance = 0.0;
    double composite = 0.0;
    double valid_rmse = 0.0;
};

struct TrainSummary {
    std::vector<EpochLog> history;
    /// Epoch whose parameters were kept (0 = initialization).
    std::size_t best_epoch = 0;
    double best_valid_rmse = 0.0;
    double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Windows and targets of a set of samples.
struct BatchData {
    std::vector<std::vector<double>> windows;  // each N x D_X, row-major
    std::vector<std::vector<double>> targets;  // each H
};

BatchData gather(const data::WindowedDataset& dataset, std::span<const data::Sample> samples);

struct LossTerms {
    compute::Tensor total;
    double mse = 0.0;
    double fcm = 0.0;
    double overlap = 0.0;
    double balance = 0.0;
};

/// What the shared epoch loop needs from a trainable forecaster.
struct Learner {
    std::vector<compute::Tensor> parameters;
    /// Called once with the training batch before the first epoch (may be empty).
    std::function<void(const BatchData& train, compute::Rng& rng)> prepare;
    std::function<LossTerms(const BatchData& batch, compute::Rng& rng)> loss;
    /// Evaluation-mode forecasts, one length-H row per window.
    std::function<std::vector<std::vector<double>>(const BatchData& batch)> predict;
};

/// Shuffled mini-batch Adam over the training split. After every epoch the
/// validation RMSE is measured and the best parameters so far are kept; they
/// are restored into the learner's tensors on return. A non-finite loss or
/// gradient raises NonFiniteError naming the epoch and batch.
TrainSummary fit(Learner& learner, const data::WindowedDataset& dataset, const TrainOptions& options,
                 const EpochCallback& on_epoch = {});

/// Trains with the composite loss under winner-takes-all routing and places
/// the initial cluster centers on the latents of randomly drawn training windows.
TrainSummary train(FuzzformerModel& model, const data::WindowedDataset& dataset, const TrainOptions& options,
                   const EpochCallback& on_epoch = {});

std::vector<std::vector<double>> predict(const FuzzformerModel& model, const BatchData& batch,
                                         std::size_t chunk = 256);

struct Evaluation {
    data::Split split = data::Split::test;
    double rmse = 0.0;
    /// RMSE at each horizon step across samples.
    std::vector<double> step_rmse;
    std::vector<std::size_t> starts;
    std::vector<std::vector<double>> forecasts;
    std::vector<std::vector<double>> targets;
    /// Samples a forecaster declined (ARIMA fit failures).
    std::size_t skipped = 0;
};

/// Aggregate-mode forecasts over one split.
Evaluation evaluate(const FuzzformerModel& model, const data::WindowedDataset& dataset, data::Split split);

/// Evaluates a batch forecaster over one split; an empty row skips that sample.
Evaluation evaluate_with(const data::WindowedDataset& dataset, data::Split split,
                         const std::function<std::vector<std::vector<double>>(const BatchData&)>& forecaster);

/// sqrt(mean squared residual) over every entry; NaN when there are no entries.
double rmse(const std::vector<std::vector<double>>& forecasts, const std::vector<std::vector<double>>& targets);

}  // namespace fuzzformer::training
