#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fuzzformer/attention.hpp"
#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/compute/tensor.hpp"

namespace fuzzformer::encoder {

/// One LSTM layer. Gate blocks are packed along the last axis in the order
/// input, forget, candidate, output.
struct LstmLayerParams {
    compute::Tensor input_weights;      // [D_in, 4 D_h]
    compute::Tensor recurrent_weights;  // [D_h, 4 D_h]
    compute::Tensor bias;               // [4 D_h]

    static LstmLayerParams create(std::size_t input_dim, std::size_t hidden, compute::Rng& rng);

    std::size_t input_dim() const { return input_weights->dim(0); }
    std::size_t hidden() const { return recurrent_weights->dim(0); }
    void validate() const;

    std::vector<std::pair<std::string, compute::Tensor>> named_parameters(const std::string& prefix) const;
};

struct LstmState {
    compute::Tensor hidden;  // [B, D_h]
    compute::Tensor cell;    // [B, D_h]
};

/// One time step of the standard LSTM cell on a [B, D_in] input.
LstmState lstm_step(const compute::Tensor& input, const LstmState& state, const LstmLayerParams& params);

/// Runs a layer over [B, N, D_in] from a zero state -> [B, N, D_h].
compute::Tensor run_lstm(const compute::Tensor& sequence, const LstmLayerParams& params);

struct EncoderConfig {
    std::size_t input_dim = 4;
    std::size_t window = 60;
    std::size_t horizon = 30;
    std::size_t hidden = 128;
    std::size_t lstm_layers = 2;
    std::size_t attention_layers = 2;
    std::size_t heads = 4;
    std::size_t latent_dim = 2;
    double dropout = 0.1;
    /// Adds each attention block's input to its output.
    bool residual = true;

    void validate() const;
};

struct EncoderParams {
    std::vector<LstmLayerParams> lstm;
    std::vector<attention::MhaParams> attention;
    compute::Tensor latent_weights;     // [D_h, D_Z]
    compute::Tensor latent_bias;        // [D_Z]
    compute::Tensor exogenous_weights;  // [D_h, H]
    compute::Tensor exogenous_bias;     // [H]

    static EncoderParams create(const EncoderConfig& config, compute::Rng& rng);
    std::vector<std::pair<std::string, compute::Tensor>> named_parameters() const;
};

struct EncoderOutput {
    compute::Tensor sequence_features;  // [B, N, D_h], LSTM output after dropout
    compute::Tensor attended;           // [B, N, D_h]
    compute::Tensor z_latent;           // [B, D_Z]
    compute::Tensor u_latent;           // [B, H]
    /// attention_weights[layer][head] is [B, N, N].
    std::vector<std::vector<compute::Tensor>> attention_weights;
};

/// Dropout is applied only when `training` is set, drawing masks from `rng`.
struct EncodeMode {
    bool training = false;
    compute::Rng* rng = nullptr;
};

/// Encodes a batch of windows [B, N, D_X]: LSTM stack (dropout after each
/// layer), attention stack, mean over time, then a tanh dense head for the
/// antecedent latent and a linear head for the exogenous sequence.
EncoderOutput encode_window(const compute::Tensor& windows, const EncoderConfig& config,
                            const EncoderParams& params, EncodeMode mode = {});

}  // namespace fuzzformer::encoder
