#include "doctest.h"

#include <cmath>
#include <numeric>

#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"
#include "fuzzformer/fuzzy.hpp"
#include "fuzzformer/losses.hpp"
#include "fuzzformer/model.hpp"
#include "support/gradcheck.hpp"
#include "support/random_clusters.hpp"

using namespace fuzzformer;
using namespace fuzzformer::losses;
using fuzzy::GaussianCluster;

namespace {

GaussianCluster isotropic(Eigen::VectorXd center, double variance) {
    const auto dim = center.size();
    return GaussianCluster::from_covariance(std::move(center),
                                            Eigen::MatrixXd::Identity(dim, dim) * variance);
}

ModelConfig tiny_model_config() {
    ModelConfig c;
    c.encoder.input_dim = 2;
    c.encoder.window = 6;
    c.encoder.horizon = 3;
    c.encoder.hidden = 8;
    c.encoder.heads = 2;
    c.encoder.latent_dim = 2;
    c.encoder.dropout = 0.1;
    c.rules = 3;
    c.ar_order = 2;
    c.exo_order = 1;
    c.integration = 1;
    return c;
}

Batch random_batch(const ModelConfig& config, std::size_t size, compute::Rng& rng) {
    std::vector<std::vector<double>> windows(size), targets(size);
    for (std::size_t b = 0; b < size; ++b) {
        windows[b].resize(config.encoder.window * config.encoder.input_dim);
        for (double& x : windows[b]) x = rng.uniform(0, 1);
        targets[b].resize(config.encoder.horizon);
        for (double& x : targets[b]) x = rng.uniform(0, 1);
    }
    return make_batch(windows, targets, config);
}

}  // namespace

TEST_CASE("mse_loss examples") {
    std::vector<double> y{0.1, 0.2, 0.3};
    CHECK(mse_loss(y, y) == 0.0);
    std::vector<double> zeros(30, 0.0), ones(30, 1.0);
    CHECK(mse_loss(zeros, ones) == doctest::Approx(30.0).epsilon(1e-15));
    std::vector<double> f{0.5, -0.1, 0.35}, f2(3);
    for (std::size_t i = 0; i < 3; ++i) f2[i] = y[i] + 2.0 * (f[i] - y[i]);
    CHECK(mse_loss(y, f2) == doctest::Approx(4.0 * mse_loss(y, f)).epsilon(1e-12));
    std::vector<double> short_f{1.0};
    CHECK_THROWS_AS(mse_loss(y, short_f), ShapeError);
}

TEST_CASE("fcm_loss examples") {
    Eigen::VectorXd mu(2);
    mu << 0.3, -0.7;
    std::vector<GaussianCluster> one{isotropic(mu, 1.0)};
    Eigen::MatrixXd collapsed(3, 2);
    collapsed.rowwise() = mu.transpose();
    CHECK(fcm_loss(collapsed, one) == 0.0);

    Eigen::MatrixXd at_two(1, 2);
    at_two << 0.3 + 2.0, -0.7;
    CHECK(fcm_loss(at_two, one) == doctest::Approx(4.0).epsilon(1e-14));

    const double r = 1.5;
    Eigen::VectorXd left(2), right(2);
    left << -r, 0.0;
    right << r, 0.0;
    std::vector<GaussianCluster> two{isotropic(left, 0.7), isotropic(right, 0.7)};
    Eigen::MatrixXd midway = Eigen::MatrixXd::Zero(1, 2);
    CHECK(fcm_loss(midway, two) == doctest::Approx(r * r).epsilon(1e-14));
}

TEST_CASE("overlap_loss examples") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(1), one = Eigen::VectorXd::Ones(1);
    std::vector<GaussianCluster> pair{isotropic(zero, 1.0), isotropic(one, 1.0)};
    CHECK(std::abs(overlap_loss(pair) - 16.0) < 1e-9);

    double previous = overlap_loss(pair);
    for (double gap : {1.5, 2.0, 4.0, 8.0}) {
        std::vector<GaussianCluster> apart{isotropic(zero, 1.0), isotropic(one * gap, 1.0)};
        const double current = overlap_loss(apart);
        CHECK(current < previous);
        previous = current;
    }
    std::vector<GaussianCluster> single{isotropic(zero, 1.0)};
    CHECK(overlap_loss(single) == 0.0);

    std::vector<GaussianCluster> coincident{isotropic(zero, 1.0), isotropic(zero, 1.0)};
    CHECK(overlap_loss(coincident) == doctest::Approx(2.0 / kOverlapFloor));
}

TEST_CASE("balance_loss examples and properties") {
    std::vector<fuzzy::MembershipVector> uniform{{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}};
    CHECK(std::abs(balance_loss(uniform)) < 1e-15);
    std::vector<fuzzy::MembershipVector> onehot{{1.0, 0.0}, {1.0, 0.0}};
    CHECK(std::abs(balance_loss(onehot) - std::log(2.0)) < 1e-12);

    compute::Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t rules = 2 + rng.below(5);
        std::vector<fuzzy::MembershipVector> batch(1 + rng.below(6));
        for (auto& row : batch) {
            std::vector<double> d2(rules);
            for (double& d : d2) d = rng.uniform(0, 10);
            row = fuzzy::memberships_from_distances(d2);
        }
        const double base = balance_loss(batch);
        CHECK(base >= 0.0);
        std::vector<std::size_t> perm(rules);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        auto permuted = batch;
        for (std::size_t k = 0; k < batch.size(); ++k)
            for (std::size_t i = 0; i < rules; ++i) permuted[k][i] = batch[k][perm[i]];
        CHECK(balance_loss(permuted) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("graph losses agree with plain evaluations") {
    compute::Rng rng(12);
    const std::size_t batch = 5, rules = 4, dim = 2;
    auto clusters = testing::random_clusters(rng, rules, dim);
    std::vector<double> centers, factors, latent(batch * dim);
    for (const auto& c : clusters) {
        for (Eigen::Index i = 0; i < c.center.size(); ++i) centers.push_back(c.center[i]);
        for (Eigen::Index i = 0; i < c.factor.rows(); ++i)
            for (Eigen::Index j = 0; j < c.factor.cols(); ++j) factors.push_back(c.factor(i, j));
    }
    for (double& x : latent) x = rng.uniform(-2, 2);
    auto mu = compute::constant({rules, dim}, centers);
    auto cov = fuzzy::covariance_from_factor(compute::constant({rules, dim, dim}, factors),
                                             fuzzy::kCovarianceFloor);
    auto z = compute::constant({batch, dim}, latent);
    auto psi = fuzzy::memberships(fuzzy::mahalanobis_sq(z, mu, cov));

    Eigen::MatrixXd zm(batch, dim);
    for (std::size_t k = 0; k < batch; ++k)
        for (std::size_t i = 0; i < dim; ++i) zm(k, i) = latent[k * dim + i];
    CHECK(fcm_loss(psi, fuzzy::squared_distance(z, mu))->item() ==
          doctest::Approx(fcm_loss(zm, clusters)).epsilon(1e-12));
    CHECK(overlap_loss(fuzzy::bhattacharyya_matrix(mu, cov))->item() ==
          doctest::Approx(overlap_loss(clusters)).epsilon(1e-12));

    std::vector<fuzzy::MembershipVector> rows(batch);
    for (std::size_t k = 0; k < batch; ++k) {
        Eigen::VectorXd zk = zm.row(static_cast<Eigen::Index>(k)).transpose();
        rows[k] = fuzzy::memberships(zk, clusters);
    }
    CHECK(balance_loss(psi)->item() == doctest::Approx(balance_loss(rows)).epsilon(1e-12));

    std::vector<double> y(6), f(6);
    for (double& x : y) x = rng.uniform(-1, 1);
    for (double& x : f) x = rng.uniform(-1, 1);
    CHECK(mse_loss(compute::constant({2, 3}, y), compute::constant({2, 3}, f))->item() ==
          doctest::Approx(mse_loss(y, f)).epsilon(1e-14));
}

TEST_CASE("loss gradients match finite differences") {
    compute::Rng rng(13);
    auto leaf = [&](compute::Shape shape, double lo, double hi) {
        std::vector<double> v(compute::element_count(shape));
        for (double& x : v) x = rng.uniform(lo, hi);
        return compute::parameter(std::move(shape), std::move(v));
    };
    auto psi_logits = leaf({4, 3}, -1, 1);
    auto distances = leaf({4, 3}, 0.1, 2);
    auto db = leaf({3, 3}, 0.2, 2);
    auto fcm = [&] { return fcm_loss(compute::softmax(psi_logits), distances); };
    auto overlap = [&] { return overlap_loss(db); };
    auto balance = [&] { return balance_loss(compute::softmax(psi_logits)); };
    CHECK(testing::check_gradients(fcm, {{"logits", psi_logits}, {"d", distances}}).max_relative_error < 1e-4);
    CHECK(testing::check_gradients(overlap, {{"db", db}}).max_relative_error < 1e-4);
    CHECK(testing::check_gradients(balance, {{"logits", psi_logits}}).max_relative_error < 1e-4);
}

TEST_CASE("composite_loss examples") {
    compute::Rng rng(14);
    auto config = tiny_model_config();
    auto model = FuzzformerModel::create(config, rng);
    auto batch = random_batch(config, 5, rng);
    model.initialize_clusters(random_batch(config, config.rules, rng));

    SUBCASE("mse-only weights reduce to the winner forecasts' error") {
        compute::Rng mask_rng(1);
        auto out = composite_loss(batch, model, {1.0, 0.0, 0.0, 0.0}, ForwardOptions::training(mask_rng));
        compute::Rng replay(1);
        auto forward = model.forward(batch, ForwardOptions::training(replay));
        CHECK(out.total->item() == mse_loss(batch.targets->value(), forward.forecast->value()));
    }
    SUBCASE("unit weights sum the components exactly") {
        auto options = ForwardOptions::evaluation();
        options.winner_takes_all = true;
        auto out = composite_loss(batch, model, {1.0, 1.0, 1.0, 1.0}, options);
        const double expected = out.mse->item() + out.fcm->item() + out.overlap->item() + out.balance->item();
        CHECK(out.total->item() == expected);

        // Components recomputed independently from the forward pass.
        auto forward = model.forward(batch, options);
        auto clusters = model.clusters();
        const auto& z = forward.encoding.z_latent->value();
        Eigen::MatrixXd zm(5, 2);
        std::vector<fuzzy::MembershipVector> rows(5);
        for (Eigen::Index k = 0; k < 5; ++k) {
            zm(k, 0) = z[2 * k];
            zm(k, 1) = z[2 * k + 1];
            rows[k] = fuzzy::memberships(Eigen::VectorXd(zm.row(k).transpose()), clusters);
        }
        CHECK(out.mse->item() == doctest::Approx(mse_loss(batch.targets->value(), forward.forecast->value())).epsilon(1e-12));
        CHECK(out.fcm->item() == doctest::Approx(fcm_loss(zm, clusters)).epsilon(1e-10));
        CHECK(out.overlap->item() == doctest::Approx(overlap_loss(clusters)).epsilon(1e-10));
        CHECK(out.balance->item() == doctest::Approx(balance_loss(rows)).epsilon(1e-10));
    }
    SUBCASE("finite and nonnegative on a random model") {
        for (int trial = 0; trial < 5; ++trial) {
            compute::Rng mask_rng(100 + trial);
            auto fresh = FuzzformerModel::create(config, rng);
            auto out = composite_loss(random_batch(config, 4, rng), fresh, {}, ForwardOptions::training(mask_rng));
            CHECK(std::isfinite(out.total->item()));
            CHECK(out.total->item() >= 0.0);
            CHECK(out.mse->item() >= 0.0);
            CHECK(out.fcm->item() >= 0.0);
            CHECK(out.overlap->item() >= 0.0);
            CHECK(out.balance->item() >= -1e-15);
        }
    }
}

TEST_CASE("winner-takes-all matches aggregation under one-hot memberships") {
    compute::Rng rng(15);
    auto config = tiny_model_config();
    auto model = FuzzformerModel::create(config, rng);
    auto batch = random_batch(config, 4, rng);
    // Tiny isotropic clusters spread far apart make memberships one-hot to machine precision.
    auto centers = model.centers->mutable_value();
    for (std::size_t i = 0; i < centers.size(); ++i) centers[i] = static_cast<double>(i) * 3.0;
    for (double& f : model.factors->mutable_value()) f = 0.0;
    for (std::size_t r = 0; r < config.rules; ++r)
        for (std::size_t i = 0; i < 2; ++i) model.factors->mutable_value()[r * 4 + i * 3] = 1e-2;

    auto aggregate = model.forward(batch, ForwardOptions::evaluation());
    for (double m : aggregate.memberships->value()) CHECK((m == 0.0 || m == 1.0));
    auto options = ForwardOptions::evaluation();
    options.winner_takes_all = true;
    auto winner = model.forward(batch, options);
    CHECK(winner.winners == aggregate.winners);
    for (std::size_t i = 0; i < winner.forecast->size(); ++i)
        CHECK(winner.forecast->value()[i] == doctest::Approx(aggregate.forecast->value()[i]).epsilon(1e-14));
}

TEST_CASE("composite gradient reaches every parameter group") {
    compute::Rng rng(16);
    auto config = tiny_model_config();
    auto model = FuzzformerModel::create(config, rng);
    auto batch = random_batch(config, 6, rng);
    model.initialize_clusters(random_batch(config, config.rules, rng));
    compute::Rng mask_rng(3);
    auto out = composite_loss(batch, model, {}, ForwardOptions::training(mask_rng));
    compute::backward(out.total);
    for (const auto& [name, tensor] : model.named_parameters()) {
        double norm = 0.0;
        for (double g : tensor->grad()) norm += g * g;
        CAPTURE(name);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("model validation") {
    auto config = tiny_model_config();
    config.ar_order = 6;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = tiny_model_config();
    config.rules = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    LossWeights weights{0.0, 0.1, 0.1, 0.1};
    CHECK_THROWS_AS(weights.validate(), ConfigError);
    weights = {1.0, -0.1, 0.1, 0.1};
    CHECK_THROWS_AS(weights.validate(), ConfigError);
}
