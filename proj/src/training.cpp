#include "fuzzformer/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "fuzzformer/error.hpp"

namespace fuzzformer::training {

using compute::Tensor;
using data::Split;

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<Tensor>& params) {
    Snapshot out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p->value().begin(), p->value().end());
    return out;
}

void restore(const std::vector<Tensor>& params, const Snapshot& saved) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i]->mutable_value();
        std::copy(saved[i].begin(), saved[i].end(), dst.begin());
    }
}

BatchData subset(const BatchData& all, std::span<const std::size_t> rows) {
    BatchData out;
    out.windows.reserve(rows.size());
    out.targets.reserve(rows.size());
    for (std::size_t r : rows) {
        out.windows.push_back(all.windows[r]);
        out.targets.push_back(all.targets[r]);
    }
    return out;
}

}  // namespace

BatchData gather(const data::WindowedDataset& dataset, std::span<const data::Sample> samples) {
    BatchData out;
    out.windows.reserve(samples.size());
    out.targets.reserve(samples.size());
    for (const auto& s : samples) {
        out.windows.push_back(dataset.input(s));
        out.targets.push_back(dataset.target(s));
    }
    return out;
}

double rmse(const std::vector<std::vector<double>>& forecasts, const std::vector<std::vector<double>>& targets) {
    if (forecasts.size() != targets.size()) throw ShapeError("rmse: forecast and target counts differ");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        if (forecasts[i].size() != targets[i].size()) throw ShapeError("rmse: forecast and target lengths differ");
        for (std::size_t j = 0; j < forecasts[i].size(); ++j) {
            const double r = forecasts[i][j] - targets[i][j];
            sum += r * r;
        }
        count += forecasts[i].size();
    }
    return count == 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(sum / static_cast<double>(count));
}

TrainSummary fit(Learner& learner, const data::WindowedDataset& dataset, const TrainOptions& options,
                 const EpochCallback& on_epoch) {
    if (options.batch_size == 0) throw ConfigError("train: batch size must be at least 1");
    const auto started = std::chrono::steady_clock::now();
    const auto train_samples = dataset.samples(Split::train);
    const auto valid_samples = dataset.samples(Split::valid);
    if (options.epochs > 0 && train_samples.empty()) throw DataError("train: the training split is empty");
    const BatchData train_data = gather(dataset, train_samples);
    const BatchData valid_data = gather(dataset, valid_samples);

    compute::Rng rng(options.seed);
    if (learner.prepare) learner.prepare(train_data, rng);

    auto validate = [&]() -> double {
        if (valid_data.windows.empty()) return std::numeric_limits<double>::quiet_NaN();
        return rmse(learner.predict(valid_data), valid_data.targets);
    };

    TrainSummary summary;
    Snapshot best = snapshot(learner.parameters);
    summary.best_valid_rmse = validate();
    compute::AdamState state{options.adam, {}, {}, 0};
    std::vector<std::size_t> order(train_data.windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        rng.shuffle(order);
        EpochLog log;
        log.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
            const std::size_t end = std::min(order.size(), begin + options.batch_size);
            const auto batch = subset(train_data, std::span(order).subspan(begin, end - begin));
            try {
                LossTerms terms = learner.loss(batch, rng);
                compute::backward(terms.total);
                log.mse += terms.mse;
                log.fcm += terms.fcm;
                log.overlap += terms.overlap;
                log.balance += terms.balance;
                log.composite += terms.total->item();
            } catch (const NonFiniteError& e) {
                throw NonFiniteError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches + 1) +
                                     ": " + e.what());
            }
            compute::adam_step(learner.parameters, state);
            ++batches;
        }
        const double n = static_cast<double>(batches);
        log.mse /= n;
        log.fcm /= n;
        log.overlap /= n;
        log.balance /= n;
        log.composite /= n;
        log.valid_rmse = validate();
        const bool improved = std::isnan(log.valid_rmse) || std::isnan(summary.best_valid_rmse) ||
                              log.valid_rmse < summary.best_valid_rmse;
        if (improved) {
            best = snapshot(learner.parameters);
            summary.best_epoch = epoch;
            summary.best_valid_rmse = log.valid_rmse;
        }
        summary.history.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    restore(learner.parameters, best);
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return summary;
}

std::vector<std::vector<double>> predict(const FuzzformerModel& model, const BatchData& batch, std::size_t chunk) {
    compute::NoGradGuard guard;
    const std::size_t h = model.config().encoder.horizon;
    std::vector<std::vector<double>> out;
    out.reserve(batch.windows.size());
    for (std::size_t begin = 0; begin < batch.windows.size(); begin += chunk) {
        const std::size_t count = std::min(chunk, batch.windows.size() - begin);
        auto b = make_batch(std::span(batch.windows).subspan(begin, count), {}, model.config());
        auto result = model.forward(b, ForwardOptions::evaluation());
        auto f = result.forecast->value();
        for (std::size_t i = 0; i < count; ++i) out.emplace_back(f.begin() + i * h, f.begin() + (i + 1) * h);
    }
    return out;
}

TrainSummary train(FuzzformerModel& model, const data::WindowedDataset& dataset, const TrainOptions& options,
                   const EpochCallback& on_epoch) {
    options.weights.validate();
    const auto& config = model.config();
    if (config.encoder.window != dataset.window() || config.encoder.horizon != dataset.horizon() ||
        config.encoder.input_dim != dataset.cols()) {
        throw ConfigError("train: model expects N=" + std::to_string(config.encoder.window) +
                          ", H=" + std::to_string(config.encoder.horizon) + ", D_X=" +
                          std::to_string(config.encoder.input_dim) + " but the dataset has N=" +
                          std::to_string(dataset.window()) + ", H=" + std::to_string(dataset.horizon()) +
                          ", D_X=" + std::to_string(dataset.cols()));
    }
    Learner learner;
    learner.parameters = model.parameters();
    learner.prepare = [&model](const BatchData& train, compute::Rng& rng) {
        if (train.windows.empty()) return;
        std::vector<std::size_t> pick(train.windows.size());
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        rng.shuffle(pick);
        pick.resize(std::min(pick.size(), model.config().rules));
        const auto warmup = subset(train, pick);
        model.initialize_clusters(make_batch(warmup.windows, {}, model.config()));
    };
    learner.loss = [&model, &options](const BatchData& batch, compute::Rng& rng) {
        auto b = make_batch(batch.windows, batch.targets, model.config());
        auto parts = losses::composite_loss(b, model, options.weights, ForwardOptions::training(rng));
        return LossTerms{parts.total, parts.mse->item(), parts.fcm->item(), parts.overlap->item(),
                         parts.balance->item()};
    };
    learner.predict = [&model](const BatchData& batch) { return predict(model, batch); };
    return fit(learner, dataset, options, on_epoch);
}

Evaluation evaluate_with(const data::WindowedDataset& dataset, Split split,
                         const std::function<std::vector<std::vector<double>>(const BatchData&)>& forecaster) {
    const auto samples = dataset.samples(split);
    const BatchData batch = gather(dataset, samples);
    const auto rows = batch.windows.empty() ? std::vector<std::vector<double>>{} : forecaster(batch);
    if (rows.size() != samples.size()) throw ShapeError("evaluate: forecaster returned the wrong number of rows");
    Evaluation ev;
    ev.split = split;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].empty()) {
            ++ev.skipped;
            continue;
        }
        ev.starts.push_back(samples[i].start);
        ev.forecasts.push_back(rows[i]);
        ev.targets.push_back(batch.targets[i]);
    }
    ev.rmse = rmse(ev.forecasts, ev.targets);
    ev.step_rmse.assign(dataset.horizon(), 0.0);
    for (std::size_t j = 0; j < dataset.horizon(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < ev.forecasts.size(); ++i) {
            const double r = ev.forecasts[i][j] - ev.targets[i][j];
            sum += r * r;
        }
        ev.step_rmse[j] = ev.forecasts.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : std::sqrt(sum / static_cast<double>(ev.forecasts.size()));
    }
    return ev;
}

Evaluation evaluate(const FuzzformerModel& model, const data::WindowedDataset& dataset, Split split) {
    return evaluate_with(dataset, split, [&model](const BatchData& batch) { return predict(model, batch); });
}

}  // namespace fuzzformer::training
