#include "fuzzformer/compute/init.hpp"

#include <cmath>

namespace fuzzformer::compute {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
    std::vector<double> values(element_count(shape));
    for (double& v : values) v = rng.uniform(-bound, bound);
    return parameter(std::move(shape), std::move(values));
}

}  // namespace fuzzformer::compute
