#include "fuzzformer/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <Eigen/Dense>

#include "fuzzformer/compute/init.hpp"
#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"
#include "fuzzformer/losses.hpp"

namespace fuzzformer::baselines {

using compute::Tensor;
namespace ops = compute;

namespace {

std::vector<double> difference(std::span<const double> series, std::size_t d) {
    std::vector<double> x(series.begin(), series.end());
    for (std::size_t k = 0; k < d; ++k) {
        if (x.empty()) break;
        for (std::size_t t = 0; t + 1 < x.size(); ++t) x[t] = x[t + 1] - x[t];
        x.pop_back();
    }
    return x;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs, const char* stage) {
    if (design.rows() <= design.cols()) {
        throw FitError(std::string("fit_arima: ") + stage + " regression has " + std::to_string(design.rows()) +
                       " equations for " + std::to_string(design.cols()) + " unknowns");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols()) {
        throw FitError(std::string("fit_arima: ") + stage + " regression is rank-deficient");
    }
    return qr.solve(rhs);
}

// Reflects inverse roots of 1 + ma_1 z + ... + ma_q z^q that lie outside the
// unit circle to their reciprocals, so the residual recursion stays stable.
void make_invertible(std::vector<double>& ma) {
    const auto q = static_cast<Eigen::Index>(ma.size());
    if (q == 0) return;
    // Inverse roots are the eigenvalues of the companion matrix of z^q + ma_1 z^{q-1} + ... + ma_q.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index j = 0; j < q; ++j) companion(0, j) = -ma[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 1; i < q; ++i) companion(i, i - 1) = 1.0;
    Eigen::VectorXcd lambda = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues();
    bool changed = false;
    for (auto& l : lambda) {
        if (std::abs(l) > 1.0) {
            l = 1.0 / std::conj(l);
            changed = true;
        }
    }
    if (!changed) return;
    Eigen::VectorXcd poly = Eigen::VectorXcd::Zero(q + 1);  // poly(k) multiplies z^{q-k}
    poly(0) = 1.0;
    for (Eigen::Index r = 0; r < q; ++r)
        for (Eigen::Index k = r + 1; k >= 1; --k) poly(k) -= lambda(r) * poly(k - 1);
    for (Eigen::Index j = 0; j < q; ++j) ma[static_cast<std::size_t>(j)] = poly(j + 1).real();
}

Tensor window_tensor(const training::BatchData& batch, std::size_t window, std::size_t channels) {
    std::vector<double> x;
    x.reserve(batch.windows.size() * window * channels);
    for (const auto& w : batch.windows) {
        if (w.size() != window * channels) throw ShapeError("lstm baseline: window size mismatch");
        x.insert(x.end(), w.begin(), w.end());
    }
    return compute::constant({batch.windows.size(), window, channels}, std::move(x));
}

}  // namespace

void ArimaOrder::validate() const {
    if (p == 0 && q == 0) throw ConfigError("ARIMA order needs p >= 1 or q >= 1");
    if (d > 1) throw ConfigError("ARIMA order supports d in {0, 1}");
}

std::string ArimaOrder::to_string() const {
    return "ARIMA(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")";
}

std::size_t long_ar_order(const ArimaOrder& order) { return std::max<std::size_t>(20, 2 * (order.p + order.q)); }

ArimaCoefficients fit_arima(std::span<const double> window, const ArimaOrder& order) {
    order.validate();
    ArimaCoefficients c{order, std::vector<double>(order.p, 0.0), std::vector<double>(order.q, 0.0), 0.0};
    std::vector<double> x = difference(window, order.d);
    const auto n = static_cast<Eigen::Index>(x.size());
    if (n == 0) throw FitError("fit_arima: window too short to difference");
    if (order.d == 0) {
        for (double v : x) c.mean += v;
        c.mean /= static_cast<double>(n);
        for (double& v : x) v -= c.mean;
    }
    if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) return c;

    const auto p = static_cast<Eigen::Index>(order.p);
    const auto q = static_cast<Eigen::Index>(order.q);
    std::vector<double> resid(x.size(), 0.0);
    Eigen::Index first = p;
    if (q > 0) {
        const auto m = static_cast<Eigen::Index>(long_ar_order(order));
        const Eigen::Index rows = n - m;
        if (rows <= m) {
            throw FitError("fit_arima: " + std::to_string(n) + " differenced points are too few for the order-" +
                           std::to_string(m) + " long autoregression");
        }
        Eigen::MatrixXd design(rows, m);
        Eigen::VectorXd rhs(rows);
        for (Eigen::Index r = 0; r < rows; ++r) {
            rhs(r) = x[static_cast<std::size_t>(m + r)];
            for (Eigen::Index i = 0; i < m; ++i) design(r, i) = x[static_cast<std::size_t>(m + r - 1 - i)];
        }
        const Eigen::VectorXd phi = least_squares(design, rhs, "long autoregression");
        const Eigen::VectorXd fitted = design * phi;
        for (Eigen::Index r = 0; r < rows; ++r) resid[static_cast<std::size_t>(m + r)] = rhs(r) - fitted(r);
        first = std::max(p, m + q);
    }
    const Eigen::Index rows = n - first;
    if (rows <= 0) throw FitError("fit_arima: window too short for " + order.to_string());
    Eigen::MatrixXd design(rows, p + q);
    Eigen::VectorXd rhs(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto t = static_cast<std::size_t>(first + r);
        rhs(r) = x[t];
        for (Eigen::Index i = 0; i < p; ++i) design(r, i) = x[t - 1 - static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < q; ++j) design(r, p + j) = resid[t - 1 - static_cast<std::size_t>(j)];
    }
    const Eigen::VectorXd beta = least_squares(design, rhs, "final");
    for (Eigen::Index i = 0; i < p; ++i) c.ar[static_cast<std::size_t>(i)] = beta(i);
    for (Eigen::Index j = 0; j < q; ++j) c.ma[static_cast<std::size_t>(j)] = beta(p + j);
    make_invertible(c.ma);
    return c;
}

std::vector<double> arima_forecast(const ArimaCoefficients& coeffs, std::span<const double> window,
                                   std::size_t horizon) {
    const std::size_t d = coeffs.order.d;
    if (window.size() <= d) throw FitError("arima_forecast: window too short");
    std::vector<double> x = difference(window, d);
    if (d == 0)
        for (double& v : x) v -= coeffs.mean;
    const std::size_t n = x.size();
    const std::size_t p = coeffs.ar.size();
    const std::size_t q = coeffs.ma.size();
    std::vector<double> e(n + horizon, 0.0);
    x.resize(n + horizon, 0.0);
    auto predict_at = [&](std::size_t t) {
        double v = 0.0;
        for (std::size_t i = 0; i < p && i < t; ++i) v += coeffs.ar[i] * x[t - 1 - i];
        for (std::size_t j = 0; j < q && j < t; ++j) v += coeffs.ma[j] * e[t - 1 - j];
        return v;
    };
    for (std::size_t t = 0; t < n; ++t) e[t] = x[t] - predict_at(t);
    for (std::size_t t = n; t < n + horizon; ++t) x[t] = predict_at(t);  // future shocks stay zero

    std::vector<double> out(horizon);
    double level = window.back();
    for (std::size_t h = 0; h < horizon; ++h) {
        if (d == 0) {
            out[h] = x[n + h] + coeffs.mean;
        } else {
            level += x[n + h];
            out[h] = level;
        }
        if (!std::isfinite(out[h])) throw NonFiniteError("arima_forecast: non-finite forecast at step " + std::to_string(h + 1));
    }
    return out;
}

std::vector<double> persistence_forecast(std::span<const double> window, std::size_t horizon) {
    if (window.empty()) throw DataError("persistence_forecast: empty window");
    return std::vector<double>(horizon, window.back());
}

std::vector<double> main_channel(std::span<const double> window, std::size_t channels) {
    std::vector<double> out;
    out.reserve(window.size() / channels);
    for (std::size_t i = 0; i < window.size(); i += channels) out.push_back(window[i]);
    return out;
}

std::vector<std::vector<double>> persistence_batch(const training::BatchData& batch, std::size_t channels,
                                                   std::size_t horizon) {
    std::vector<std::vector<double>> out;
    for (const auto& w : batch.windows) out.push_back(persistence_forecast(main_channel(w, channels), horizon));
    return out;
}

std::vector<std::vector<double>> arima_batch(const training::BatchData& batch, std::size_t channels,
                                             std::size_t horizon, const ArimaOrder& order, std::size_t threads) {
    order.validate();
    const std::size_t count = batch.windows.size();
    std::vector<std::vector<double>> out(count);
    auto work = [&](std::size_t i) {
        const auto series = main_channel(batch.windows[i], channels);
        try {
            out[i] = arima_forecast(fit_arima(series, order), series, horizon);
        } catch (const FitError&) {
            out[i].clear();
        } catch (const NonFiniteError&) {
            out[i].clear();
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) work(i);
        return out;
    }
    // Each worker writes only its own slots, so the result order is fixed by window index.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) work(i);
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

void LstmBaselineConfig::validate() const {
    if (input_dim == 0 || window == 0 || horizon == 0 || hidden == 0 || layers == 0) {
        throw ConfigError("lstm baseline: all extents must be at least 1");
    }
    if (horizon > window) throw ConfigError("lstm baseline: horizon H must not exceed window N");
}

LstmBaseline LstmBaseline::create(const LstmBaselineConfig& config, compute::Rng& rng) {
    config.validate();
    LstmBaseline m;
    m.config_ = config;
    for (std::size_t l = 0; l < config.layers; ++l) {
        m.layers.push_back(
            encoder::LstmLayerParams::create(l == 0 ? config.input_dim : config.hidden, config.hidden, rng));
    }
    m.head_weights = compute::init_uniform({config.hidden, 1}, config.hidden, rng);
    m.head_bias = compute::init_uniform({1}, config.hidden, rng);
    return m;
}

Tensor LstmBaseline::forward(const Tensor& windows) const {
    Tensor h = windows;
    for (const auto& layer : layers) h = encoder::run_lstm(h, layer);
    const std::size_t batch = windows->dim(0);
    const std::size_t n = config_.window;
    auto per_step = ops::reshape(ops::add(ops::matmul(h, head_weights), head_bias), {batch, n});
    return ops::slice(per_step, 1, n - config_.horizon, n);
}

std::vector<std::pair<std::string, Tensor>> LstmBaseline::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto named = layers[l].named_parameters("lstm." + std::to_string(l));
        out.insert(out.end(), named.begin(), named.end());
    }
    out.emplace_back("head.weights", head_weights);
    out.emplace_back("head.bias", head_bias);
    return out;
}

std::vector<Tensor> LstmBaseline::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::vector<std::vector<double>> predict(const LstmBaseline& model, const training::BatchData& batch,
                                         std::size_t chunk) {
    compute::NoGradGuard guard;
    const auto& cfg = model.config();
    std::vector<std::vector<double>> out;
    for (std::size_t begin = 0; begin < batch.windows.size(); begin += chunk) {
        const std::size_t count = std::min(chunk, batch.windows.size() - begin);
        training::BatchData part;
        part.windows.assign(batch.windows.begin() + static_cast<std::ptrdiff_t>(begin),
                            batch.windows.begin() + static_cast<std::ptrdiff_t>(begin + count));
        const auto forecast = model.forward(window_tensor(part, cfg.window, cfg.input_dim));
        const auto f = forecast->value();
        for (std::size_t i = 0; i < count; ++i)
            out.emplace_back(f.begin() + i * cfg.horizon, f.begin() + (i + 1) * cfg.horizon);
    }
    return out;
}

training::TrainSummary train_lstm_baseline(LstmBaseline& model, const data::WindowedDataset& dataset,
                                           const training::TrainOptions& options,
                                           const training::EpochCallback& on_epoch) {
    const auto& cfg = model.config();
    if (cfg.window != dataset.window() || cfg.horizon != dataset.horizon() || cfg.input_dim != dataset.cols()) {
        throw ConfigError("lstm baseline: configuration does not match the dataset's N, H or channel count");
    }
    training::Learner learner;
    learner.parameters = model.parameters();
    learner.loss = [&model, &cfg](const training::BatchData& batch, compute::Rng&) {
        std::vector<double> y;
        for (const auto& t : batch.targets) y.insert(y.end(), t.begin(), t.end());
        auto targets = compute::constant({batch.targets.size(), cfg.horizon}, std::move(y));
        auto loss = losses::mse_loss(targets, model.forward(window_tensor(batch, cfg.window, cfg.input_dim)));
        return training::LossTerms{loss, loss->item(), 0.0, 0.0, 0.0};
    };
    learner.predict = [&model](const training::BatchData& batch) { return predict(model, batch); };
    return training::fit(learner, dataset, options, on_epoch);
}

}  // namespace fuzzformer::baselines
