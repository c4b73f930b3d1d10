#pragma once

// Independent simulation of y = B(z) / (A(z) (1 - z)^d) u for z = q^-1, by
// power-series long division of the transfer function and convolution with
// the input. Starts from rest: u(t) = 0 and y(t) = 0 for t < 0.

#include <vector>

namespace fuzzformer::testing {

inline std::vector<double> polynomial_product(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

/// First `length` impulse-response coefficients.
inline std::vector<double> impulse_response(const std::vector<double>& ar, const std::vector<double>& exo,
                                            int integration, std::size_t length) {
    std::vector<double> denominator{1.0};
    denominator.insert(denominator.end(), ar.begin(), ar.end());
    for (int i = 0; i < integration; ++i) denominator = polynomial_product(denominator, {1.0, -1.0});
    std::vector<double> numerator{0.0};
    numerator.insert(numerator.end(), exo.begin(), exo.end());
    std::vector<double> h(length, 0.0);
    for (std::size_t t = 0; t < length; ++t) {
        double acc = t < numerator.size() ? numerator[t] : 0.0;
        for (std::size_t i = 1; i < denominator.size() && i <= t; ++i) acc -= denominator[i] * h[t - i];
        h[t] = acc / denominator[0];
    }
    return h;
}

inline std::vector<double> simulate_transfer(const std::vector<double>& ar, const std::vector<double>& exo,
                                             int integration, const std::vector<double>& input) {
    const auto h = impulse_response(ar, exo, integration, input.size());
    std::vector<double> y(input.size(), 0.0);
    for (std::size_t t = 0; t < input.size(); ++t)
        for (std::size_t i = 0; i <= t; ++i) y[t] += h[i] * input[t - i];
    return y;
}

}  // namespace fuzzformer::testing
