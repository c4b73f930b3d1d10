#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fuzzformer/compute/tensor.hpp"

// ARIX rule consequents. Each rule i forecasts the main series H steps ahead
// through
//
//     (1 - q^-1)^d A(q^-1) y(t) = B(q^-1) u(t),
//     A(q^-1) = 1 + a_1 q^-1 + ... + a_p q^-p,
//     B(q^-1) = b_1 q^-1 + ... + b_q q^-q.
//
// Note the sign: the recursion subtracts a_m, unlike the φ convention of most
// ARIMA texts. The exogenous sequence is indexed from the forecast origin k:
// u_seq[i] = u(k + i), so step j reads u_seq[j - n] and inputs before the
// origin are taken as zero.

namespace fuzzformer::arix {

struct ArixCoefficients {
    std::vector<double> ar;   // a_1 .. a_p
    std::vector<double> exo;  // b_1 .. b_q
    int integration = 1;      // d, 0 or 1

    /// Throws ConfigError unless p >= 1 and d is 0 or 1.
    void validate() const;
    std::size_t history_length() const { return ar.size() + static_cast<std::size_t>(integration); }
};

/// Forecast of one rule for steps k+1 .. k+H.
using RuleForecast = std::vector<double>;

/// `history` holds observed y up to y(k) (oldest first); only the trailing
/// p + d values are read. Throws DataError if it is shorter, ShapeError if
/// u_seq is shorter than the horizon while q >= 1, and NonFiniteError when
/// the recursion diverges.
RuleForecast arix_forecast(std::span<const double> history, std::span<const double> u_seq,
                           const ArixCoefficients& coeffs, std::size_t horizon);

/// Σ_i Ψ_i Ŷ_i, elementwise over the horizon.
std::vector<double> aggregate(std::span<const double> memberships,
                              std::span<const RuleForecast> rule_forecasts);

// ---- differentiable counterparts --------------------------------------

/// history [B, p+d] (data, no gradient), exogenous [B, H], ar [C, p],
/// exo [C, q] -> [B, C, H] forecasts of every rule.
compute::Tensor forecast_all_rules(const compute::Tensor& history,
                                   const compute::Tensor& exogenous, const compute::Tensor& ar,
                                   const compute::Tensor& exo, int integration);

/// Same recursion, but sample b only runs rule `rules[b]` -> [B, H].
compute::Tensor forecast_selected_rules(const compute::Tensor& history,
                                        const compute::Tensor& exogenous,
                                        const compute::Tensor& ar, const compute::Tensor& exo,
                                        int integration, std::span<const std::size_t> rules);

/// memberships [B, C], rule forecasts [B, C, H] -> [B, H].
compute::Tensor aggregate(const compute::Tensor& memberships, const compute::Tensor& rule_forecasts);

}  // namespace fuzzformer::arix
