#include "fuzzformer/attention.hpp"

#include <cmath>

#include "fuzzformer/compute/init.hpp"
#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"

namespace fuzzformer::attention {

namespace ops = compute;
using compute::Tensor;

AttentionOutput scaled_dot_attention(const Tensor& query, const Tensor& key, const Tensor& value) {
    const std::size_t rank = query->rank();
    if ((rank != 2 && rank != 3) || key->rank() != rank || value->rank() != rank) {
        throw ShapeError("scaled_dot_attention: operands must all be rank 2 or rank 3");
    }
    const std::size_t rows_axis = rank - 2;
    if (key->dim(rows_axis) != value->dim(rows_axis) ||
        query->shape().back() != key->shape().back() ||
        (rank == 3 && (query->dim(0) != key->dim(0) || key->dim(0) != value->dim(0)))) {
        throw ShapeError("scaled_dot_attention: incompatible Q " + compute::to_string(query->shape()) +
                         ", K " + compute::to_string(key->shape()) + ", V " +
                         compute::to_string(value->shape()));
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(query->shape().back()));
    auto scores = ops::scale(ops::matmul(query, ops::transpose(key)), scale);
    auto weights = ops::softmax(scores);
    return {ops::matmul(weights, value), weights};
}

MhaParams MhaParams::create(std::size_t input_dim, std::size_t heads, std::size_t output_dim,
                            compute::Rng& rng) {
    if (heads == 0 || input_dim % heads != 0) {
        throw ConfigError("multi_head: input width " + std::to_string(input_dim) +
                          " is not divisible by head count " + std::to_string(heads));
    }
    const std::size_t head_dim = input_dim / heads;
    MhaParams p;
    for (std::size_t h = 0; h < heads; ++h) {
        p.query.push_back(compute::init_uniform({input_dim, head_dim}, input_dim, rng));
        p.key.push_back(compute::init_uniform({input_dim, head_dim}, input_dim, rng));
    }
    p.value = compute::init_uniform({input_dim, head_dim}, input_dim, rng);
    p.output = compute::init_uniform({heads * head_dim, output_dim}, heads * head_dim, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> MhaParams::named_parameters(const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t h = 0; h < heads(); ++h) {
        out.emplace_back(prefix + ".query." + std::to_string(h), query[h]);
        out.emplace_back(prefix + ".key." + std::to_string(h), key[h]);
    }
    out.emplace_back(prefix + ".value", value);
    out.emplace_back(prefix + ".output", output);
    return out;
}

MultiHeadOutput multi_head(const Tensor& sequence, const MhaParams& params) {
    if (sequence->shape().back() != params.input_dim()) {
        throw ShapeError("multi_head: sequence width " + std::to_string(sequence->shape().back()) +
                         " does not match D_in " + std::to_string(params.input_dim()));
    }
    const auto values = ops::matmul(sequence, params.value);
    MultiHeadOutput result;
    std::vector<Tensor> heads;
    heads.reserve(params.heads());
    for (std::size_t h = 0; h < params.heads(); ++h) {
        auto attended = scaled_dot_attention(ops::matmul(sequence, params.query[h]),
                                             ops::matmul(sequence, params.key[h]), values);
        heads.push_back(attended.output);
        result.head_weights.push_back(attended.weights);
    }
    auto joined = heads.size() == 1 ? heads.front() : ops::concat(heads, sequence->rank() - 1);
    result.output = ops::matmul(joined, params.output);
    return result;
}

}  // namespace fuzzformer::attention
