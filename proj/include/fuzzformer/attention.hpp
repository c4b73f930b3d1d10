#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/compute/tensor.hpp"

namespace fuzzformer::attention {

struct AttentionOutput {
    compute::Tensor output;   // [.., N, d_out]
    compute::Tensor weights;  // [.., N, N], rows sum to one
};

/// softmax(Q K^T / sqrt(D_h)) V with a row-wise softmax. Accepts [N, D] or
/// batched [B, N, D] operands.
AttentionOutput scaled_dot_attention(const compute::Tensor& query, const compute::Tensor& key,
                                     const compute::Tensor& value);

/// Per-head query/key projections with a single value projection shared by
/// all heads, followed by an output projection of the concatenated heads.
/// Head width is D_in / heads.
struct MhaParams {
    std::vector<compute::Tensor> query;  // heads x [D_in, D_h]
    std::vector<compute::Tensor> key;    // heads x [D_in, D_h]
    compute::Tensor value;               // [D_in, D_h]
    compute::Tensor output;              // [heads * D_h, D_out]

    /// Throws ConfigError when D_in is not divisible by `heads`.
    static MhaParams create(std::size_t input_dim, std::size_t heads, std::size_t output_dim,
                            compute::Rng& rng);

    std::size_t heads() const { return query.size(); }
    std::size_t input_dim() const { return value->dim(0); }
    std::size_t head_dim() const { return value->dim(1); }
    std::size_t output_dim() const { return output->dim(1); }

    std::vector<std::pair<std::string, compute::Tensor>> named_parameters(const std::string& prefix) const;
};

struct MultiHeadOutput {
    compute::Tensor output;                     // [.., N, D_out]
    std::vector<compute::Tensor> head_weights;  // per head, [.., N, N]
};

MultiHeadOutput multi_head(const compute::Tensor& sequence, const MhaParams& params);

}  // namespace fuzzformer::attention
