#pragma once

#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/compute/tensor.hpp"

namespace fuzzformer::compute {

/// Trainable tensor drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace fuzzformer::compute
