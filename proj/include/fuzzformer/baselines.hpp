#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/compute/tensor.hpp"
#include "fuzzformer/encoder.hpp"
#include "fuzzformer/training.hpp"

namespace fuzzformer::baselines {

struct ArimaOrder {
    std::size_t p = 4;
    std::size_t d = 1;
    std::size_t q = 1;

    void validate() const;
    std::string to_string() const;  // "ARIMA(p,d,q)"
};

/// x_t = mean + sum_i ar[i] (x_{t-1-i} - mean) + sum_j ma[j] e_{t-1-j} + e_t on
/// the d-times differenced series.
struct ArimaCoefficients {
    ArimaOrder order;
    std::vector<double> ar;
    std::vector<double> ma;
    double mean = 0.0;
};

/// Order of the long autoregression in the first estimation stage.
std::size_t long_ar_order(const ArimaOrder& order);

/// Two-stage Hannan-Rissanen least squares. Throws FitError when the window is
/// too short for the regressions or a design matrix is rank-deficient.
ArimaCoefficients fit_arima(std::span<const double> window, const ArimaOrder& order);

/// Recursive forecast with future shocks set to zero, integrated back to levels.
std::vector<double> arima_forecast(const ArimaCoefficients& coeffs, std::span<const double> window,
                                   std::size_t horizon);

std::vector<double> persistence_forecast(std::span<const double> window, std::size_t horizon);

/// Main-channel values of a row-major N x D_X window.
std::vector<double> main_channel(std::span<const double> window, std::size_t channels);

/// Persistence forecasts for a batch of windows.
std::vector<std::vector<double>> persistence_batch(const training::BatchData& batch, std::size_t channels,
                                                   std::size_t horizon);

/// Per-window ARIMA refits; windows whose fit fails get an empty row. Fits run
/// on `threads` workers (0 = hardware concurrency); results keep window order.
std::vector<std::vector<double>> arima_batch(const training::BatchData& batch, std::size_t channels,
                                             std::size_t horizon, const ArimaOrder& order,
                                             std::size_t threads = 1);

struct LstmBaselineConfig {
    std::size_t input_dim = 4;
    std::size_t window = 60;
    std::size_t horizon = 30;
    std::size_t hidden = 128;
    std::size_t layers = 2;

    void validate() const;
};

/// Stacked LSTM with a per-step linear read-out; the last H outputs of the
/// window form the forecast.
class LstmBaseline {
public:
    static LstmBaseline create(const LstmBaselineConfig& config, compute::Rng& rng);

    /// windows [B, N, D_X] -> forecasts [B, H].
    compute::Tensor forward(const compute::Tensor& windows) const;

    const LstmBaselineConfig& config() const { return config_; }
    std::vector<std::pair<std::string, compute::Tensor>> named_parameters() const;
    std::vector<compute::Tensor> parameters() const;

    std::vector<encoder::LstmLayerParams> layers;
    compute::Tensor head_weights;  // [D_h, 1]
    compute::Tensor head_bias;     // [1]

private:
    LstmBaselineConfig config_;
};

std::vector<std::vector<double>> predict(const LstmBaseline& model, const training::BatchData& batch,
                                         std::size_t chunk = 256);

/// Adam on the summed squared error with the shared epoch loop.
training::TrainSummary train_lstm_baseline(LstmBaseline& model, const data::WindowedDataset& dataset,
                                           const training::TrainOptions& options,
                                           const training::EpochCallback& on_epoch = {});

}  // namespace fuzzformer::baselines
