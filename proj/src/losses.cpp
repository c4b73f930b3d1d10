#include "fuzzformer/losses.hpp"

#include <cmath>

#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"

namespace fuzzformer::losses {

namespace ops = compute;
using compute::Tensor;
using compute::TensorNode;

void LossWeights::validate() const {
    if (mse <= 0.0 || fcm < 0.0 || overlap < 0.0 || balance < 0.0) {
        throw ConfigError("loss weights must be nonnegative with a positive MSE weight");
    }
}

double mse_loss(std::span<const double> targets, std::span<const double> forecasts) {
    if (targets.size() != forecasts.size()) {
        throw ShapeError("mse_loss: " + std::to_string(targets.size()) + " targets vs " +
                         std::to_string(forecasts.size()) + " forecasts");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double r = targets[i] - forecasts[i];
        total += r * r;
    }
    return total;
}

double fcm_loss(const Eigen::MatrixXd& latents, std::span<const fuzzy::GaussianCluster> clusters) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < latents.rows(); ++k) {
        const Eigen::VectorXd z = latents.row(k).transpose();
        const auto psi = fuzzy::memberships(z, clusters);
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            total += psi[i] * (z - clusters[i].center).squaredNorm();
        }
    }
    return total;
}

double overlap_loss(std::span<const fuzzy::GaussianCluster> clusters, double floor) {
    double total = 0.0;
    for (std::size_t m = 0; m < clusters.size(); ++m)
        for (std::size_t n = 0; n < clusters.size(); ++n) {
            if (m == n) continue;
            total += 1.0 / std::max(fuzzy::bhattacharyya(clusters[m], clusters[n]), floor);
        }
    return total;
}

double balance_loss(std::span<const fuzzy::MembershipVector> memberships) {
    if (memberships.empty()) return 0.0;
    const std::size_t rules = memberships.front().size();
    std::vector<double> mean(rules, 0.0);
    for (const auto& row : memberships) {
        if (row.size() != rules) throw ShapeError("balance_loss: ragged membership rows");
        for (std::size_t i = 0; i < rules; ++i) mean[i] += row[i];
    }
    double total = 0.0;
    for (double& p : mean) {
        p /= static_cast<double>(memberships.size());
        if (p > 0.0) total += p * std::log(p * static_cast<double>(rules));
    }
    return total;
}

Tensor mse_loss(const Tensor& targets, const Tensor& forecasts) {
    if (targets->shape() != forecasts->shape()) {
        throw ShapeError("mse_loss: targets " + compute::to_string(targets->shape()) + " vs forecasts " +
                         compute::to_string(forecasts->shape()));
    }
    return ops::sum(ops::square(ops::sub(targets, forecasts)));
}

Tensor fcm_loss(const Tensor& memberships, const Tensor& euclidean_sq) {
    if (memberships->shape() != euclidean_sq->shape()) {
        throw ShapeError("fcm_loss: membership and distance shapes differ");
    }
    return ops::sum(ops::mul(memberships, euclidean_sq));
}

Tensor overlap_loss(const Tensor& bhattacharyya, double floor) {
    if (bhattacharyya->rank() != 2 || bhattacharyya->dim(0) != bhattacharyya->dim(1)) {
        throw ShapeError("overlap_loss: expected a square distance matrix");
    }
    const std::size_t rules = bhattacharyya->dim(0);
    auto d = bhattacharyya->value();
    double total = 0.0;
    for (std::size_t m = 0; m < rules; ++m)
        for (std::size_t n = 0; n < rules; ++n)
            if (m != n) total += 1.0 / std::max(d[m * rules + n], floor);
    TensorNode* pd = bhattacharyya.get();
    return compute::make_node("overlap_loss", {1}, {total}, {bhattacharyya}, [pd, rules, floor](const TensorNode& self) {
        const double g = self.grad()[0];
        auto d = pd->value();
        auto gd = pd->mutable_grad();
        for (std::size_t m = 0; m < rules; ++m)
            for (std::size_t n = 0; n < rules; ++n) {
                const double v = d[m * rules + n];
                if (m != n && v > floor) gd[m * rules + n] -= g / (v * v);
            }
    });
}

Tensor balance_loss(const Tensor& memberships) {
    if (memberships->rank() != 2) throw ShapeError("balance_loss: expected [B, C] memberships");
    auto mean = ops::mean_axis(memberships, 0);
    const double rules = static_cast<double>(memberships->dim(1));
    double total = 0.0;
    for (double p : mean->value())
        if (p > 0.0) total += p * std::log(p * rules);
    TensorNode* pm = mean.get();
    return compute::make_node("balance_loss", {1}, {total}, {mean}, [pm, rules](const TensorNode& self) {
        const double g = self.grad()[0];
        auto p = pm->value();
        auto gp = pm->mutable_grad();
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] > 0.0) gp[i] += g * (std::log(p[i] * rules) + 1.0);
    });
}

LossBreakdown composite_loss(const Batch& batch, const FuzzformerModel& model, const LossWeights& weights,
                             const ForwardOptions& options) {
    weights.validate();
    if (!batch.targets) throw ShapeError("composite_loss: batch has no targets");
    LossBreakdown out;
    out.forward = model.forward(batch, options);
    const auto& f = out.forward;
    out.mse = mse_loss(batch.targets, f.forecast);
    out.fcm = fcm_loss(f.memberships, fuzzy::squared_distance(f.encoding.z_latent, model.centers));
    out.overlap = overlap_loss(fuzzy::bhattacharyya_matrix(model.centers, f.covariances));
    out.balance = balance_loss(f.memberships);
    out.total = ops::add(ops::add(ops::add(ops::scale(out.mse, weights.mse), ops::scale(out.fcm, weights.fcm)),
                                  ops::scale(out.overlap, weights.overlap)),
                         ops::scale(out.balance, weights.balance));
    return out;
}

}  // namespace fuzzformer::losses
