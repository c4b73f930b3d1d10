#include "fuzzformer/compute/adam.hpp"

#include <cmath>

#include "fuzzformer/error.hpp"

namespace fuzzformer::compute {

void adam_step(std::span<const Tensor> params, AdamState& state) {
    if (state.step_count == 0) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (const auto& p : params) {
            state.first_moment.emplace_back(p->size(), 0.0);
            state.second_moment.emplace_back(p->size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: parameter list changed between steps");
    }
    ++state.step_count;
    const auto& o = state.options;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(o.beta1, t);
    const double correction2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t idx = 0; idx < params.size(); ++idx) {
        TensorNode& p = *params[idx];
        auto& m = state.first_moment[idx];
        auto& v = state.second_moment[idx];
        if (m.size() != p.size()) throw ShapeError("adam_step: parameter resized between steps");
        auto w = p.mutable_value();
        auto g = p.mutable_grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
            v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            w[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
            g[i] = 0.0;
        }
    }
}

void zero_grad(std::span<const Tensor> params) {
    for (const auto& p : params) p->zero_grad();
}

}  // namespace fuzzformer::compute
