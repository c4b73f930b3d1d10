#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "fuzzformer/compute/random.hpp"
#include "fuzzformer/compute/tensor.hpp"
#include "fuzzformer/fuzzy.hpp"
#include "fuzzformer/model.hpp"

namespace fuzzformer::losses {

/// Floor applied to Bhattacharyya distances before taking reciprocals.
inline constexpr double kOverlapFloor = 1e-8;

struct LossWeights {
    double mse = 1.0;
    double fcm = 0.1;
    double overlap = 0.01;
    double balance = 0.1;

    /// All weights nonnegative, mse strictly positive.
    void validate() const;
};

// ---- plain evaluations ------------------------------------------------

/// Σ over all entries of (target - forecast)^2.
double mse_loss(std::span<const double> targets, std::span<const double> forecasts);

/// Σ_i Σ_k softmax(-d_i²(k)) ||z_k - μ_i||²; rows of `latents` are samples.
/// The weights use Mahalanobis distances, the penalty Euclidean ones.
double fcm_loss(const Eigen::MatrixXd& latents, std::span<const fuzzy::GaussianCluster> clusters);

/// Σ_m Σ_{n != m} 1 / max(d_B(m, n), floor).
double overlap_loss(std::span<const fuzzy::GaussianCluster> clusters, double floor = kOverlapFloor);

/// KL divergence of the batch-mean membership from uniform (natural log,
/// 0 log 0 = 0).
double balance_loss(std::span<const fuzzy::MembershipVector> memberships);

// ---- graph versions ---------------------------------------------------

compute::Tensor mse_loss(const compute::Tensor& targets, const compute::Tensor& forecasts);
/// memberships [B, C] and squared Euclidean distances [B, C].
compute::Tensor fcm_loss(const compute::Tensor& memberships, const compute::Tensor& euclidean_sq);
/// From a [C, C] Bhattacharyya matrix.
compute::Tensor overlap_loss(const compute::Tensor& bhattacharyya, double floor = kOverlapFloor);
/// From [B, C] memberships.
compute::Tensor balance_loss(const compute::Tensor& memberships);

struct LossBreakdown {
    compute::Tensor mse;
    compute::Tensor fcm;
    compute::Tensor overlap;
    compute::Tensor balance;
    compute::Tensor total;
    ForwardResult forward;
};

/// Weighted sum of the four losses for one batch. The forecast term uses the
/// options' routing (winner-takes-all in training); rule selection itself
/// carries no gradient.
LossBreakdown composite_loss(const Batch& batch, const FuzzformerModel& model, const LossWeights& weights,
                             const ForwardOptions& options);

}  // namespace fuzzformer::losses
