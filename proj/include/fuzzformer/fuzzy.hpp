#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "fuzzformer/compute/tensor.hpp"

// Rule antecedents: multivariate Gaussian clusters over the latent vector,
// softmax-normalized memberships, and the Bhattacharyya distance between
// clusters.

namespace fuzzformer::fuzzy {

inline constexpr double kCovarianceFloor = 1e-6;

/// One antecedent fuzzy set. The covariance is held as an unconstrained
/// lower-triangular factor L (entries above the diagonal are ignored), with
/// covariance = L L^T + epsilon I, so it stays positive definite under any
/// gradient update.
struct GaussianCluster {
    Eigen::VectorXd center;
    Eigen::MatrixXd factor;
    double epsilon = kCovarianceFloor;

    Eigen::MatrixXd covariance() const;

    /// Chooses the factor so that covariance() reproduces `covariance`.
    static GaussianCluster from_covariance(Eigen::VectorXd center, const Eigen::MatrixXd& covariance,
                                           double epsilon = kCovarianceFloor);
};

/// Ψ: nonnegative, sums to one.
using MembershipVector = std::vector<double>;

/// (z - μ)^T Σ^{-1} (z - μ) via a Cholesky solve.
double mahalanobis_sq(const Eigen::VectorXd& z, const GaussianCluster& cluster);

MembershipVector memberships(const Eigen::VectorXd& z, std::span<const GaussianCluster> clusters);
/// softmax(-d²), shifted by the smallest distance before exponentiating.
MembershipVector memberships_from_distances(std::span<const double> distances_sq);

double bhattacharyya(const GaussianCluster& a, const GaussianCluster& b);

/// Index of the most activated rule; the lowest index wins ties.
std::size_t hardmax_rule(const Eigen::VectorXd& z, std::span<const GaussianCluster> clusters);
std::size_t hardmax_from_distances(std::span<const double> distances_sq);

// ---- differentiable counterparts --------------------------------------

/// [C, D, D] raw factors -> [C, D, D] covariances L L^T + epsilon I.
compute::Tensor covariance_from_factor(const compute::Tensor& factors, double epsilon);

/// z [B, D], centers [C, D], covariances [C, D, D] -> [B, C] squared
/// Mahalanobis distances.
compute::Tensor mahalanobis_sq(const compute::Tensor& z, const compute::Tensor& centers,
                               const compute::Tensor& covariances);

/// z [B, D], centers [C, D] -> [B, C] squared Euclidean distances.
compute::Tensor squared_distance(const compute::Tensor& z, const compute::Tensor& centers);

/// [C, D] centers, [C, D, D] covariances -> [C, C] pairwise distances, zero
/// on the diagonal.
compute::Tensor bhattacharyya_matrix(const compute::Tensor& centers,
                                     const compute::Tensor& covariances);

/// [B, C] squared distances -> [B, C] memberships.
compute::Tensor memberships(const compute::Tensor& distances_sq);

/// Materializes clusters from [C, D] centers and [C, D, D] factors.
std::vector<GaussianCluster> clusters_from(const compute::Tensor& centers,
                                           const compute::Tensor& factors, double epsilon);

}  // namespace fuzzformer::fuzzy
