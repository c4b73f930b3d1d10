#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fuzzformer/compute/tensor.hpp"

namespace fuzzformer::compute {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment estimates for an ordered parameter list. Moments are allocated
/// (zero-filled) on the first step, so a fresh state has step_count == 0.
struct AdamState {
    AdamOptions options;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step_count = 0;
};

/// One bias-corrected Adam update of every parameter, then zeroes gradients.
/// The parameter list must keep the same order and shapes across calls.
void adam_step(std::span<const Tensor> params, AdamState& state);

void zero_grad(std::span<const Tensor> params);

}  // namespace fuzzformer::compute
