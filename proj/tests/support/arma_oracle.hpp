#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fuzzformer::testing {

/// x_t = sum_i ar[i] x_{t-1-i} + e_t + sum_j ma[j] e_{t-1-j}, e ~ N(0, 1),
/// after discarding a burn-in. Uses the standard library generator so it is
/// independent of the code under test.
inline std::vector<double> simulate_arma(const std::vector<double>& ar, const std::vector<double>& ma,
                                         std::size_t length, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t burn = 500;
    std::vector<double> x(length + burn, 0.0), e(length + burn, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        e[t] = noise(engine);
        double v = e[t];
        for (std::size_t i = 0; i < ar.size() && i < t; ++i) v += ar[i] * x[t - 1 - i];
        for (std::size_t j = 0; j < ma.size() && j < t; ++j) v += ma[j] * e[t - 1 - j];
        x[t] = v;
    }
    return {x.begin() + static_cast<std::ptrdiff_t>(burn), x.end()};
}

}  // namespace fuzzformer::testing
