#include "fuzzformer/encoder.hpp"

#include <cmath>
#include <memory>

#include "fuzzformer/compute/init.hpp"
#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"

namespace fuzzformer::encoder {

namespace ops = compute;
using compute::Tensor;

LstmLayerParams LstmLayerParams::create(std::size_t input_dim, std::size_t hidden, compute::Rng& rng) {
    // fan_in of each gate pre-activation is D_in + D_h.
    const std::size_t fan_in = input_dim + hidden;
    return {compute::init_uniform({input_dim, 4 * hidden}, fan_in, rng),
            compute::init_uniform({hidden, 4 * hidden}, fan_in, rng),
            compute::init_uniform({4 * hidden}, fan_in, rng)};
}

void LstmLayerParams::validate() const {
    const std::size_t h = recurrent_weights->dim(0);
    if (input_weights->rank() != 2 || recurrent_weights->rank() != 2 || bias->rank() != 1 ||
        input_weights->dim(1) != 4 * h || recurrent_weights->dim(1) != 4 * h || bias->dim(0) != 4 * h) {
        throw ShapeError("LstmLayerParams: weight shapes inconsistent with hidden width " +
                         std::to_string(h));
    }
}

std::vector<std::pair<std::string, Tensor>> LstmLayerParams::named_parameters(const std::string& prefix) const {
    return {{prefix + ".input_weights", input_weights},
            {prefix + ".recurrent_weights", recurrent_weights},
            {prefix + ".bias", bias}};
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// c' = sigmoid(f) c + sigmoid(i) tanh(g), reading the i, f, g blocks of packed gates [B, 4H].
// Activations are kept for the backward pass.
Tensor cell_update(const Tensor& gates, const Tensor& cell) {
    const std::size_t batch = cell->dim(0);
    const std::size_t h = cell->dim(1);
    std::vector<double> out(batch * h);
    auto act = std::make_shared<std::vector<double>>(3 * batch * h);
    auto a = gates->value();
    auto c = cell->value();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = a.data() + b * 4 * h;
        for (std::size_t j = 0; j < h; ++j) {
            const std::size_t k = b * h + j;
            const double i = logistic(row[j]);
            const double f = logistic(row[h + j]);
            const double cand = std::tanh(row[2 * h + j]);
            (*act)[3 * k] = i;
            (*act)[3 * k + 1] = f;
            (*act)[3 * k + 2] = cand;
            out[k] = f * c[k] + i * cand;
        }
    }
    compute::TensorNode* pg = gates.get();
    compute::TensorNode* pc = cell.get();
    return compute::make_node("lstm_cell", {batch, h}, std::move(out), {gates, cell},
                              [pg, pc, act, batch, h](const compute::TensorNode& self) {
                                  auto g = self.grad();
                                  auto c = pc->value();
                                  for (std::size_t b = 0; b < batch; ++b) {
                                      for (std::size_t j = 0; j < h; ++j) {
                                          const std::size_t k = b * h + j;
                                          const double up = g[k];
                                          const double i = (*act)[3 * k];
                                          const double f = (*act)[3 * k + 1];
                                          const double cand = (*act)[3 * k + 2];
                                          if (pg->requires_grad()) {
                                              double* dg = pg->mutable_grad().data() + b * 4 * h;
                                              dg[j] += up * cand * i * (1.0 - i);
                                              dg[h + j] += up * c[k] * f * (1.0 - f);
                                              dg[2 * h + j] += up * i * (1.0 - cand * cand);
                                          }
                                          if (pc->requires_grad()) pc->mutable_grad()[k] += up * f;
                                      }
                                  }
                              });
}

// h' = sigmoid(o) tanh(c'), reading the o block of packed gates [B, 4H].
Tensor hidden_output(const Tensor& gates, const Tensor& cell) {
    const std::size_t batch = cell->dim(0);
    const std::size_t h = cell->dim(1);
    std::vector<double> out(batch * h);
    auto act = std::make_shared<std::vector<double>>(2 * batch * h);
    auto a = gates->value();
    auto c = cell->value();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < h; ++j) {
            const std::size_t k = b * h + j;
            const double o = logistic(a[b * 4 * h + 3 * h + j]);
            const double tc = std::tanh(c[k]);
            (*act)[2 * k] = o;
            (*act)[2 * k + 1] = tc;
            out[k] = o * tc;
        }
    }
    compute::TensorNode* pg = gates.get();
    compute::TensorNode* pc = cell.get();
    return compute::make_node("lstm_hidden", {batch, h}, std::move(out), {gates, cell},
                              [pg, pc, act, batch, h](const compute::TensorNode& self) {
                                  auto g = self.grad();
                                  for (std::size_t b = 0; b < batch; ++b) {
                                      for (std::size_t j = 0; j < h; ++j) {
                                          const std::size_t k = b * h + j;
                                          const double up = g[k];
                                          const double o = (*act)[2 * k];
                                          const double tc = (*act)[2 * k + 1];
                                          if (pg->requires_grad())
                                              pg->mutable_grad()[b * 4 * h + 3 * h + j] += up * tc * o * (1.0 - o);
                                          if (pc->requires_grad()) pc->mutable_grad()[k] += up * o * (1.0 - tc * tc);
                                      }
                                  }
                              });
}

// One step given the input contribution x W_in + bias, already computed.
LstmState step_from_projection(const Tensor& projected, const LstmState& state, const LstmLayerParams& params) {
    auto gates = ops::add(projected, ops::matmul(state.hidden, params.recurrent_weights));
    auto cell = cell_update(gates, state.cell);
    return {hidden_output(gates, cell), cell};
}

}  // namespace

LstmState lstm_step(const Tensor& input, const LstmState& state, const LstmLayerParams& params) {
    const std::size_t h = params.hidden();
    if (input->rank() != 2 || input->dim(1) != params.input_dim() || state.hidden->rank() != 2 ||
        state.hidden->dim(1) != h || state.cell->shape() != state.hidden->shape() ||
        state.hidden->dim(0) != input->dim(0)) {
        throw ShapeError("lstm_step: input " + compute::to_string(input->shape()) + ", hidden " +
                         compute::to_string(state.hidden->shape()) + " do not match layer (D_in " +
                         std::to_string(params.input_dim()) + ", D_h " + std::to_string(h) + ")");
    }
    return step_from_projection(ops::add(ops::matmul(input, params.input_weights), params.bias), state, params);
}

Tensor run_lstm(const Tensor& sequence, const LstmLayerParams& params) {
    if (sequence->rank() != 3 || sequence->dim(2) != params.input_dim()) {
        throw ShapeError("run_lstm: expected [B, N, " + std::to_string(params.input_dim()) + "], got " +
                         compute::to_string(sequence->shape()));
    }
    const std::size_t batch = sequence->dim(0);
    const std::size_t steps = sequence->dim(1);
    const std::size_t width = 4 * params.hidden();
    // Input projections for all steps at once; only the recurrence is sequential.
    auto projected = ops::add(ops::matmul(sequence, params.input_weights), params.bias);
    LstmState state{compute::zeros({batch, params.hidden()}), compute::zeros({batch, params.hidden()})};
    std::vector<Tensor> outputs;
    outputs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        auto x = ops::reshape(ops::slice(projected, 1, t, t + 1), {batch, width});
        state = step_from_projection(x, state, params);
        outputs.push_back(state.hidden);
    }
    return ops::stack(outputs, 1);
}

void EncoderConfig::validate() const {
    if (input_dim == 0 || window == 0 || horizon == 0 || hidden == 0 || lstm_layers == 0 ||
        heads == 0 || latent_dim == 0) {
        throw ConfigError("encoder: all extents must be at least 1");
    }
    if (hidden % heads != 0) {
        throw ConfigError("encoder: hidden width " + std::to_string(hidden) +
                          " is not divisible by head count " + std::to_string(heads));
    }
    if (dropout < 0.0 || dropout > 1.0) throw ConfigError("encoder: dropout rate must lie in [0, 1]");
}

EncoderParams EncoderParams::create(const EncoderConfig& config, compute::Rng& rng) {
    config.validate();
    EncoderParams p;
    for (std::size_t l = 0; l < config.lstm_layers; ++l) {
        p.lstm.push_back(LstmLayerParams::create(l == 0 ? config.input_dim : config.hidden, config.hidden, rng));
    }
    for (std::size_t l = 0; l < config.attention_layers; ++l) {
        p.attention.push_back(attention::MhaParams::create(config.hidden, config.heads, config.hidden, rng));
    }
    p.latent_weights = compute::init_uniform({config.hidden, config.latent_dim}, config.hidden, rng);
    p.latent_bias = compute::init_uniform({config.latent_dim}, config.hidden, rng);
    p.exogenous_weights = compute::init_uniform({config.hidden, config.horizon}, config.hidden, rng);
    p.exogenous_bias = compute::init_uniform({config.horizon}, config.hidden, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t l = 0; l < lstm.size(); ++l) {
        auto layer = lstm[l].named_parameters("encoder.lstm." + std::to_string(l));
        out.insert(out.end(), layer.begin(), layer.end());
    }
    for (std::size_t l = 0; l < attention.size(); ++l) {
        auto layer = attention[l].named_parameters("encoder.attention." + std::to_string(l));
        out.insert(out.end(), layer.begin(), layer.end());
    }
    out.emplace_back("encoder.latent_weights", latent_weights);
    out.emplace_back("encoder.latent_bias", latent_bias);
    out.emplace_back("encoder.exogenous_weights", exogenous_weights);
    out.emplace_back("encoder.exogenous_bias", exogenous_bias);
    return out;
}

EncoderOutput encode_window(const Tensor& windows, const EncoderConfig& config,
                            const EncoderParams& params, EncodeMode mode) {
    if (windows->rank() != 3) {
        throw ShapeError("encode_window: expected [B, N, D_X], got " + compute::to_string(windows->shape()));
    }
    if (windows->dim(1) != config.window) {
        throw ShapeError("encode_window: window length " + std::to_string(windows->dim(1)) +
                         " != N = " + std::to_string(config.window));
    }
    if (windows->dim(2) != config.input_dim) {
        throw ShapeError("encode_window: " + std::to_string(windows->dim(2)) +
                         " channels != D_X = " + std::to_string(config.input_dim));
    }
    if (mode.training && config.dropout > 0.0 && mode.rng == nullptr) {
        throw ConfigError("encode_window: training-mode dropout needs a random generator");
    }
    EncoderOutput out;
    Tensor features = windows;
    for (const auto& layer : params.lstm) {
        features = run_lstm(features, layer);
        if (mode.training) features = ops::dropout(features, config.dropout, *mode.rng, true);
    }
    out.sequence_features = features;
    Tensor attended = features;
    for (const auto& block : params.attention) {
        auto mha = attention::multi_head(attended, block);
        attended = config.residual ? ops::add(attended, mha.output) : mha.output;
        out.attention_weights.push_back(std::move(mha.head_weights));
    }
    out.attended = attended;
    auto pooled = ops::mean_axis(attended, 1);
    out.z_latent = ops::tanh(ops::add(ops::matmul(pooled, params.latent_weights), params.latent_bias));
    out.u_latent = ops::add(ops::matmul(pooled, params.exogenous_weights), params.exogenous_bias);
    return out;
}

}  // namespace fuzzformer::encoder
