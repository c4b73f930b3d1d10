#include "fuzzformer/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"

namespace fuzzformer::fuzzy {

using compute::Tensor;
using compute::TensorNode;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Eigen::LLT<MatrixXd> factorize(const MatrixXd& sigma, const char* where) {
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw PositiveDefiniteError(std::string(where) + ": covariance is not positive definite");
    }
    return llt;
}

double log_det(const Eigen::LLT<MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

MatrixXd matrix_at(std::span<const double> data, std::size_t index, std::size_t d) {
    MatrixXd m(d, d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) m(r, c) = data[(index * d + r) * d + c];
    return m;
}

VectorXd row_at(std::span<const double> data, std::size_t index, std::size_t d) {
    VectorXd v(d);
    for (std::size_t i = 0; i < d; ++i) v(i) = data[index * d + i];
    return v;
}

}  // namespace

MatrixXd GaussianCluster::covariance() const {
    const MatrixXd lower = factor.triangularView<Eigen::Lower>();
    MatrixXd sigma = lower * lower.transpose();
    sigma.diagonal().array() += epsilon;
    return sigma;
}

GaussianCluster GaussianCluster::from_covariance(VectorXd center, const MatrixXd& covariance,
                                                 double epsilon) {
    MatrixXd shifted = covariance;
    shifted.diagonal().array() -= epsilon;
    auto llt = factorize(shifted, "from_covariance");
    return {std::move(center), llt.matrixL(), epsilon};
}

double mahalanobis_sq(const VectorXd& z, const GaussianCluster& cluster) {
    if (z.size() != cluster.center.size()) {
        throw ShapeError("mahalanobis_sq: latent has " + std::to_string(z.size()) +
                         " entries, cluster expects " + std::to_string(cluster.center.size()));
    }
    auto llt = factorize(cluster.covariance(), "mahalanobis_sq");
    const VectorXd w = llt.matrixL().solve(z - cluster.center);
    return w.squaredNorm();
}

MembershipVector memberships_from_distances(std::span<const double> distances_sq) {
    if (distances_sq.empty()) throw ConfigError("memberships: at least one rule is required");
    const double nearest = *std::min_element(distances_sq.begin(), distances_sq.end());
    MembershipVector psi(distances_sq.size());
    double total = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) total += (psi[i] = std::exp(nearest - distances_sq[i]));
    for (double& p : psi) p /= total;
    return psi;
}

MembershipVector memberships(const VectorXd& z, std::span<const GaussianCluster> clusters) {
    std::vector<double> d2;
    d2.reserve(clusters.size());
    for (const auto& c : clusters) d2.push_back(mahalanobis_sq(z, c));
    return memberships_from_distances(d2);
}

double bhattacharyya(const GaussianCluster& a, const GaussianCluster& b) {
    const MatrixXd sa = a.covariance();
    const MatrixXd sb = b.covariance();
    const MatrixXd pooled = 0.5 * (sa + sb);
    auto llt = factorize(pooled, "bhattacharyya (pooled)");
    const VectorXd delta = a.center - b.center;
    const double separation = 0.125 * delta.dot(llt.solve(delta));
    const double shape = 0.5 * (log_det(llt) - 0.5 * log_det(factorize(sa, "bhattacharyya")) -
                                0.5 * log_det(factorize(sb, "bhattacharyya")));
    return separation + shape;
}

std::size_t hardmax_from_distances(std::span<const double> distances_sq) {
    if (distances_sq.empty()) throw ConfigError("hardmax_rule: at least one rule is required");
    // min_element returns the first minimum.
    return static_cast<std::size_t>(
        std::min_element(distances_sq.begin(), distances_sq.end()) - distances_sq.begin());
}

std::size_t hardmax_rule(const VectorXd& z, std::span<const GaussianCluster> clusters) {
    std::vector<double> d2;
    d2.reserve(clusters.size());
    for (const auto& c : clusters) d2.push_back(mahalanobis_sq(z, c));
    return hardmax_from_distances(d2);
}

Tensor covariance_from_factor(const Tensor& factors, double epsilon) {
    if (factors->rank() != 3 || factors->dim(1) != factors->dim(2)) {
        throw ShapeError("covariance_from_factor: expected [C, D, D], got " +
                         compute::to_string(factors->shape()));
    }
    const std::size_t rules = factors->dim(0);
    const std::size_t d = factors->dim(1);
    auto raw = factors->value();
    std::vector<double> out(factors->size(), 0.0);
    for (std::size_t c = 0; c < rules; ++c) {
        const double* l = raw.data() + c * d * d;
        double* s = out.data() + c * d * d;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k <= std::min(i, j); ++k) acc += l[i * d + k] * l[j * d + k];
                s[i * d + j] = acc + (i == j ? epsilon : 0.0);
            }
    }
    TensorNode* pf = factors.get();
    return compute::make_node(
        "covariance_from_factor", factors->shape(), std::move(out), {factors},
        [pf, rules, d](const TensorNode& self) {
            auto g = self.grad();
            auto l = pf->value();
            auto gl = pf->mutable_grad();
            // dL = tril((G + G^T) L)
            for (std::size_t c = 0; c < rules; ++c) {
                const std::size_t base = c * d * d;
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t k = 0; k <= i; ++k) {
                        double acc = 0.0;
                        for (std::size_t j = k; j < d; ++j) {
                            acc += (g[base + i * d + j] + g[base + j * d + i]) * l[base + j * d + k];
                        }
                        gl[base + i * d + k] += acc;
                    }
            }
        });
}

Tensor mahalanobis_sq(const Tensor& z, const Tensor& centers, const Tensor& covariances) {
    if (z->rank() != 2 || centers->rank() != 2 || covariances->rank() != 3 ||
        z->dim(1) != centers->dim(1) || covariances->dim(0) != centers->dim(0) ||
        covariances->dim(1) != centers->dim(1) || covariances->dim(2) != centers->dim(1)) {
        throw ShapeError("mahalanobis_sq: incompatible shapes " + compute::to_string(z->shape()) +
                         ", " + compute::to_string(centers->shape()) + ", " +
                         compute::to_string(covariances->shape()));
    }
    const std::size_t batch = z->dim(0);
    const std::size_t rules = centers->dim(0);
    const std::size_t d = centers->dim(1);
    std::vector<MatrixXd> inverses;
    inverses.reserve(rules);
    std::vector<double> out(batch * rules);
    for (std::size_t c = 0; c < rules; ++c) {
        auto llt = factorize(matrix_at(covariances->value(), c, d), "mahalanobis_sq");
        inverses.push_back(llt.solve(MatrixXd::Identity(d, d)));
        const VectorXd mu = row_at(centers->value(), c, d);
        for (std::size_t b = 0; b < batch; ++b) {
            const VectorXd diff = row_at(z->value(), b, d) - mu;
            out[b * rules + c] = llt.matrixL().solve(diff).squaredNorm();
        }
    }
    TensorNode* pz = z.get();
    TensorNode* pm = centers.get();
    TensorNode* ps = covariances.get();
    return compute::make_node(
        "mahalanobis_sq", {batch, rules}, std::move(out), {z, centers, covariances},
        [pz, pm, ps, inverses = std::move(inverses), batch, rules, d](const TensorNode& self) {
            auto g = self.grad();
            for (std::size_t c = 0; c < rules; ++c) {
                const VectorXd mu = row_at(pm->value(), c, d);
                for (std::size_t b = 0; b < batch; ++b) {
                    const double gb = g[b * rules + c];
                    if (gb == 0.0) continue;
                    const VectorXd w = inverses[c] * (row_at(pz->value(), b, d) - mu);
                    for (std::size_t i = 0; i < d; ++i) {
                        if (pz->requires_grad()) pz->mutable_grad()[b * d + i] += 2.0 * gb * w(i);
                        if (pm->requires_grad()) pm->mutable_grad()[c * d + i] -= 2.0 * gb * w(i);
                    }
                    if (ps->requires_grad()) {
                        auto gs = ps->mutable_grad();
                        for (std::size_t i = 0; i < d; ++i)
                            for (std::size_t j = 0; j < d; ++j)
                                gs[(c * d + i) * d + j] -= gb * w(i) * w(j);
                    }
                }
            }
        });
}

Tensor squared_distance(const Tensor& z, const Tensor& centers) {
    if (z->rank() != 2 || centers->rank() != 2 || z->dim(1) != centers->dim(1)) {
        throw ShapeError("squared_distance: incompatible shapes " + compute::to_string(z->shape()) +
                         ", " + compute::to_string(centers->shape()));
    }
    const std::size_t batch = z->dim(0);
    const std::size_t rules = centers->dim(0);
    const std::size_t d = centers->dim(1);
    auto zv = z->value();
    auto mv = centers->value();
    std::vector<double> out(batch * rules, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < rules; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double diff = zv[b * d + i] - mv[c * d + i];
                acc += diff * diff;
            }
            out[b * rules + c] = acc;
        }
    TensorNode* pz = z.get();
    TensorNode* pm = centers.get();
    return compute::make_node(
        "squared_distance", {batch, rules}, std::move(out), {z, centers},
        [pz, pm, batch, rules, d](const TensorNode& self) {
            auto g = self.grad();
            auto zv = pz->value();
            auto mv = pm->value();
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t c = 0; c < rules; ++c) {
                    const double gb = g[b * rules + c];
                    for (std::size_t i = 0; i < d; ++i) {
                        const double diff = 2.0 * gb * (zv[b * d + i] - mv[c * d + i]);
                        if (pz->requires_grad()) pz->mutable_grad()[b * d + i] += diff;
                        if (pm->requires_grad()) pm->mutable_grad()[c * d + i] -= diff;
                    }
                }
        });
}

Tensor bhattacharyya_matrix(const Tensor& centers, const Tensor& covariances) {
    if (centers->rank() != 2 || covariances->rank() != 3 || covariances->dim(0) != centers->dim(0) ||
        covariances->dim(1) != centers->dim(1) || covariances->dim(2) != centers->dim(1)) {
        throw ShapeError("bhattacharyya_matrix: incompatible shapes " +
                         compute::to_string(centers->shape()) + ", " +
                         compute::to_string(covariances->shape()));
    }
    const std::size_t rules = centers->dim(0);
    const std::size_t d = centers->dim(1);
    std::vector<MatrixXd> sigma;
    std::vector<MatrixXd> sigma_inv;
    std::vector<double> log_dets;
    for (std::size_t c = 0; c < rules; ++c) {
        sigma.push_back(matrix_at(covariances->value(), c, d));
        auto llt = factorize(sigma.back(), "bhattacharyya_matrix");
        sigma_inv.push_back(llt.solve(MatrixXd::Identity(d, d)));
        log_dets.push_back(log_det(llt));
    }
    std::vector<double> out(rules * rules, 0.0);
    for (std::size_t m = 0; m < rules; ++m)
        for (std::size_t n = m + 1; n < rules; ++n) {
            auto llt = factorize(0.5 * (sigma[m] + sigma[n]), "bhattacharyya_matrix (pooled)");
            const VectorXd delta = row_at(centers->value(), m, d) - row_at(centers->value(), n, d);
            const double value = 0.125 * delta.dot(llt.solve(delta)) +
                                 0.5 * (log_det(llt) - 0.5 * log_dets[m] - 0.5 * log_dets[n]);
            out[m * rules + n] = value;
            out[n * rules + m] = value;
        }
    TensorNode* pm = centers.get();
    TensorNode* ps = covariances.get();
    return compute::make_node(
        "bhattacharyya_matrix", {rules, rules}, std::move(out), {centers, covariances},
        [pm, ps, sigma = std::move(sigma), sigma_inv = std::move(sigma_inv), rules,
         d](const TensorNode& self) {
            auto g = self.grad();
            for (std::size_t m = 0; m < rules; ++m)
                for (std::size_t n = 0; n < rules; ++n) {
                    const double gmn = g[m * rules + n];
                    if (m == n || gmn == 0.0) continue;
                    const MatrixXd pooled_inv =
                        (0.5 * (sigma[m] + sigma[n])).llt().solve(MatrixXd::Identity(d, d));
                    const VectorXd delta =
                        row_at(pm->value(), m, d) - row_at(pm->value(), n, d);
                    const VectorXd w = pooled_inv * delta;
                    if (pm->requires_grad()) {
                        auto gm = pm->mutable_grad();
                        for (std::size_t i = 0; i < d; ++i) {
                            gm[m * d + i] += gmn * 0.25 * w(i);
                            gm[n * d + i] -= gmn * 0.25 * w(i);
                        }
                    }
                    if (ps->requires_grad()) {
                        // d/dP of the value, then P = (Σm + Σn) / 2.
                        const MatrixXd d_pooled = gmn * (-0.125 * w * w.transpose() + 0.5 * pooled_inv);
                        const MatrixXd dm = 0.5 * d_pooled - 0.25 * gmn * sigma_inv[m];
                        const MatrixXd dn = 0.5 * d_pooled - 0.25 * gmn * sigma_inv[n];
                        auto gs = ps->mutable_grad();
                        for (std::size_t i = 0; i < d; ++i)
                            for (std::size_t j = 0; j < d; ++j) {
                                gs[(m * d + i) * d + j] += dm(i, j);
                                gs[(n * d + i) * d + j] += dn(i, j);
                            }
                    }
                }
        });
}

Tensor memberships(const Tensor& distances_sq) { return compute::softmax(compute::negate(distances_sq)); }

std::vector<GaussianCluster> clusters_from(const Tensor& centers, const Tensor& factors,
                                           double epsilon) {
    const std::size_t rules = centers->dim(0);
    const std::size_t d = centers->dim(1);
    std::vector<GaussianCluster> out;
    out.reserve(rules);
    for (std::size_t c = 0; c < rules; ++c) {
        out.push_back({row_at(centers->value(), c, d), matrix_at(factors->value(), c, d), epsilon});
    }
    return out;
}

}  // namespace fuzzformer::fuzzy
