#pragma once

#include <cstddef>
#include <vector>

#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/compute/tensor.hpp"

// Differentiable primitives. Every function validates shapes (ShapeError
// naming the operation) and produces a new node.
//
// Binary elementwise operations accept a right operand whose shape is a
// suffix of the left operand's shape; the right operand is then repeated
// over the leading axes (bias addition, per-feature scaling).

namespace fuzzformer::compute {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor negate(const Tensor& a);

/// [.., M, K] x [K, N] -> [.., M, N], or batched [B, M, K] x [B, K, N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

/// Numerically stabilized softmax along the last axis.
Tensor softmax(const Tensor& a);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
/// Stacks equally shaped tensors along a new axis.
Tensor stack(const std::vector<Tensor>& parts, std::size_t axis);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor mean_axis(const Tensor& a, std::size_t axis);

/// Inverted dropout. Identity unless `training`; rate 1 zeroes everything.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);

}  // namespace fuzzformer::compute
