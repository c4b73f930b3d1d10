#include "doctest.h"

#include <cmath>
#include <numeric>

#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"
#include "fuzzformer/fuzzy.hpp"
#include "support/gradcheck.hpp"
#include "support/random_clusters.hpp"

using namespace fuzzformer;
using namespace fuzzformer::fuzzy;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GaussianCluster cluster(std::initializer_list<double> center, const MatrixXd& cov) {
    VectorXd mu(static_cast<Eigen::Index>(center.size()));
    Eigen::Index i = 0;
    for (double c : center) mu(i++) = c;
    return GaussianCluster::from_covariance(mu, cov);
}

VectorXd vec(std::initializer_list<double> values) {
    VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("mahalanobis_sq examples") {
    const auto unit = cluster({1.0, -1.0}, MatrixXd::Identity(2, 2));
    CHECK(mahalanobis_sq(vec({1.0, -1.0}), unit) == doctest::Approx(0.0));
    CHECK(mahalanobis_sq(vec({4.0, 3.0}), unit) == doctest::Approx(25.0).epsilon(1e-9));
    MatrixXd diag = MatrixXd::Zero(2, 2);
    diag(0, 0) = 4.0;
    diag(1, 1) = 1.0;
    const auto stretched = cluster({0.0, 0.0}, diag);
    CHECK(mahalanobis_sq(vec({2.0, 0.0}), stretched) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("positive-definiteness violations are reported") {
    GaussianCluster degenerate{vec({0.0, 0.0}), MatrixXd::Zero(2, 2), 0.0};
    CHECK_THROWS_AS(mahalanobis_sq(vec({1.0, 0.0}), degenerate), PositiveDefiniteError);
    CHECK_THROWS_AS(bhattacharyya(degenerate, degenerate), PositiveDefiniteError);
    auto z = compute::constant({1, 2}, {0.0, 0.0});
    auto mu = compute::constant({1, 2}, {0.0, 0.0});
    auto cov = compute::constant({1, 2, 2}, {1.0, 2.0, 2.0, 1.0});
    CHECK_THROWS_AS(fuzzy::mahalanobis_sq(z, mu, cov), PositiveDefiniteError);
}

TEST_CASE("memberships examples") {
    compute::Rng rng(1);
    auto single = testing::random_clusters(rng, 1, 2);
    auto psi = memberships(vec({0.3, 0.9}), single);
    REQUIRE(psi.size() == 1);
    CHECK(psi[0] == 1.0);

    const auto left = cluster({-1.0, 0.0}, MatrixXd::Identity(2, 2));
    const auto right = cluster({1.0, 0.0}, MatrixXd::Identity(2, 2));
    std::vector<GaussianCluster> pair{left, right};
    auto half = memberships(vec({0.0, 0.7}), pair);
    CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(half[1] == doctest::Approx(0.5).epsilon(1e-12));

    const double distances[] = {0.0, std::log(3.0)};
    auto weighted = memberships_from_distances(distances);
    CHECK(weighted[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(weighted[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("memberships form a unit partition and respond monotonically") {
    compute::Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        auto clusters = testing::random_clusters(rng, 5, 2);
        const auto z = vec({rng.uniform(-3, 3), rng.uniform(-3, 3)});
        auto psi = memberships(z, clusters);
        const double total = std::accumulate(psi.begin(), psi.end(), 0.0);
        CHECK(std::abs(total - 1.0) < 1e-9);
        for (double p : psi) CHECK((p >= 0.0 && p <= 1.0));
    }
    std::vector<double> d2{0.4, 1.3, 2.2};
    const double before = memberships_from_distances(d2)[1];
    d2[1] += 0.5;
    CHECK(memberships_from_distances(d2)[1] < before);
}

TEST_CASE("bhattacharyya examples and properties") {
    compute::Rng rng(3);
    auto a = testing::random_cluster(rng, 2);
    CHECK(std::abs(bhattacharyya(a, a)) < 1e-12);

    const auto zero = cluster({0.0}, MatrixXd::Identity(1, 1));
    const auto one = cluster({1.0}, MatrixXd::Identity(1, 1));
    CHECK(bhattacharyya(zero, one) == doctest::Approx(0.125).epsilon(1e-12));

    for (int trial = 0; trial < 100; ++trial) {
        auto x = testing::random_cluster(rng, 3);
        auto y = testing::random_cluster(rng, 3);
        const double xy = bhattacharyya(x, y);
        CHECK(xy >= 0.0);
        CHECK(std::abs(xy - bhattacharyya(y, x)) <= 1e-12 * std::max(1.0, xy));
        CHECK(xy > 1e-6);
    }
}

TEST_CASE("hardmax_rule picks the nearest rule with low-index ties") {
    std::vector<GaussianCluster> clusters;
    for (double x : {-10.0, -5.0, 5.0, 0.0, 10.0}) clusters.push_back(cluster({x, 0.0}, MatrixXd::Identity(2, 2)));
    CHECK(hardmax_rule(vec({0.0, 0.0}), clusters) == 3);

    const double tie[] = {4.0, 1.0, 2.0, 3.0, 1.0};
    CHECK(hardmax_from_distances(tie) == 1);
    const double shifted[] = {11.0, 8.0, 9.0, 10.0, 8.0};
    CHECK(hardmax_from_distances(shifted) == 1);

    compute::Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        auto random = testing::random_clusters(rng, 6, 2);
        const auto z = vec({rng.uniform(-3, 3), rng.uniform(-3, 3)});
        auto psi = memberships(z, random);
        const auto argmax = static_cast<std::size_t>(std::max_element(psi.begin(), psi.end()) - psi.begin());
        CHECK(argmax == hardmax_rule(z, random));
    }
}

TEST_CASE("graph operations agree with plain evaluations") {
    compute::Rng rng(5);
    auto clusters = testing::random_clusters(rng, 3, 2);
    std::vector<double> mu, lf;
    for (const auto& c : clusters) {
        for (int i = 0; i < 2; ++i) mu.push_back(c.center(i));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) lf.push_back(c.factor(i, j));
    }
    auto centers = compute::parameter({3, 2}, mu);
    auto factors = compute::parameter({3, 2, 2}, lf);
    auto cov = covariance_from_factor(factors, kCovarianceFloor);
    auto z = compute::constant({2, 2}, {0.1, -0.4, 1.2, 0.8});
    auto d2 = fuzzy::mahalanobis_sq(z, centers, cov);
    auto psi = fuzzy::memberships(d2);
    auto bd = bhattacharyya_matrix(centers, cov);
    for (int b = 0; b < 2; ++b) {
        const auto zb = vec({z->value()[b * 2], z->value()[b * 2 + 1]});
        auto expect = memberships(zb, clusters);
        for (int c = 0; c < 3; ++c) {
            CHECK(d2->value()[b * 3 + c] == doctest::Approx(mahalanobis_sq(zb, clusters[c])).epsilon(1e-12));
            CHECK(psi->value()[b * 3 + c] == doctest::Approx(expect[c]).epsilon(1e-12));
        }
    }
    for (int m = 0; m < 3; ++m)
        for (int n = 0; n < 3; ++n) {
            const double expect = m == n ? 0.0 : bhattacharyya(clusters[m], clusters[n]);
            CHECK(bd->value()[m * 3 + n] == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("memberships and bhattacharyya gradients match finite differences") {
    compute::Rng rng(6);
    auto z = compute::parameter({4, 2}, {0.2, -0.1, 0.9, 0.4, -0.6, 0.3, 0.0, -0.8});
    auto centers = compute::parameter({3, 2}, {0.5, 0.1, -0.4, 0.6, 0.1, -0.7});
    auto factors = compute::parameter({3, 2, 2}, {0.8, 0.3, 0.2, 0.6, 1.1, -0.2, -0.3, 0.7, 0.5, 0.0, 0.4, 0.9});
    std::vector<double> w(12);
    for (double& x : w) x = rng.uniform(-1, 1);
    auto weights = compute::constant({4, 3}, w);

    auto membership_loss = [&] {
        auto cov = covariance_from_factor(factors, kCovarianceFloor);
        return compute::sum(compute::mul(fuzzy::memberships(fuzzy::mahalanobis_sq(z, centers, cov)), weights));
    };
    auto report = testing::check_gradients(membership_loss, {{"z", z}, {"centers", centers}, {"factors", factors}});
    CHECK(report.max_relative_error < 1e-4);

    std::vector<double> w9(9);
    for (double& x : w9) x = rng.uniform(-1, 1);
    auto w_pairs = compute::constant({3, 3}, w9);
    auto pair_loss = [&] {
        auto cov = covariance_from_factor(factors, kCovarianceFloor);
        return compute::sum(compute::mul(bhattacharyya_matrix(centers, cov), w_pairs));
    };
    report = testing::check_gradients(pair_loss, {{"centers", centers}, {"factors", factors}});
    CHECK(report.max_relative_error < 1e-4);

    auto euclid = [&] { return compute::sum(compute::mul(squared_distance(z, centers), weights)); };
    report = testing::check_gradients(euclid, {{"z", z}, {"centers", centers}});
    CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("covariances stay positive definite for arbitrary factors") {
    compute::Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        GaussianCluster c{vec({0.0, 0.0}), MatrixXd::Zero(2, 2), kCovarianceFloor};
        c.factor(0, 0) = rng.uniform(-1, 1);
        c.factor(1, 0) = rng.uniform(-1, 1);
        c.factor(0, 1) = rng.uniform(-5, 5);  // ignored: above the diagonal
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(c.covariance());
        CHECK(eig.eigenvalues().minCoeff() >= kCovarianceFloor * (1 - 1e-9));
    }
}
