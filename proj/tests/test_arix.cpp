#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fuzzformer/arix.hpp"
#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"
#include "support/gradcheck.hpp"
#include "support/transfer_oracle.hpp"

using namespace fuzzformer;
using namespace fuzzformer::arix;

TEST_CASE("arix_forecast examples") {
    const std::vector<double> history{0.1, 0.4, 0.3, 0.7};
    const std::vector<double> u(5, 0.2);

    SUBCASE("zero dynamics repeat the last level") {
        ArixCoefficients c{{0.0, 0.0}, {0.0}, 1};
        for (double y : arix_forecast(history, u, c, 5)) CHECK(y == 0.7);
    }
    SUBCASE("unit exogenous gain integrates a constant input") {
        ArixCoefficients c{{0.0}, {1.0}, 1};
        const std::vector<double> constant(6, 0.25);
        auto y = arix_forecast(history, constant, c, 6);
        for (std::size_t j = 1; j <= 6; ++j) CHECK(y[j - 1] == doctest::Approx(0.7 + 0.25 * j).epsilon(1e-14));
    }
    SUBCASE("a1 = -1 without integration holds the last value") {
        ArixCoefficients c{{-1.0}, {}, 0};
        for (double y : arix_forecast(history, {}, c, 5)) CHECK(y == 0.7);
    }
}

TEST_CASE("arix_forecast errors") {
    ArixCoefficients c{{0.1, 0.2, 0.3}, {0.5}, 1};
    const std::vector<double> short_history{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(arix_forecast(short_history, std::vector<double>(4, 0.0), c, 4), DataError);
    CHECK_THROWS_AS(arix_forecast(std::vector<double>(4, 0.0), std::vector<double>(2, 0.0), c, 4), ShapeError);
    CHECK_THROWS_AS((ArixCoefficients{{}, {1.0}, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((ArixCoefficients{{0.1}, {1.0}, 2}.validate()), ConfigError);

    ArixCoefficients explosive{{-1e200}, {}, 0};
    try {
        arix_forecast(std::vector<double>{1e200}, {}, explosive, 3);
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(std::string(e.what()).find("rule") != std::string::npos);
    }
}

TEST_CASE("arix_forecast matches the transfer-function oracle") {
    compute::Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t p = 1 + rng.below(3);
        const int d = static_cast<int>(rng.below(2));
        const std::size_t horizon = 1 + rng.below(10);
        ArixCoefficients c;
        c.integration = d;
        for (std::size_t m = 0; m < p; ++m) c.ar.push_back(rng.uniform(-0.9, 0.9) / static_cast<double>(p));
        c.exo = {rng.uniform(-1.0, 1.0)};
        const std::size_t origin = 25;
        std::vector<double> input(origin + horizon + 1);
        for (double& x : input) x = rng.uniform(-1.0, 1.0);
        const auto y = testing::simulate_transfer(c.ar, c.exo, d, input);
        std::vector<double> history(y.begin(), y.begin() + origin + 1);
        std::vector<double> u_seq(input.begin() + origin, input.begin() + origin + horizon);
        const auto forecast = arix_forecast(history, u_seq, c, horizon);
        for (std::size_t j = 1; j <= horizon; ++j) CHECK(std::abs(forecast[j - 1] - y[origin + j]) < 1e-9);
    }
}

TEST_CASE("first step ignores later exogenous inputs") {
    ArixCoefficients c{{0.3, -0.2}, {0.8}, 1};
    const std::vector<double> history{0.5, 0.2, 0.9};
    std::vector<double> u{0.1, 0.2, 0.3, 0.4};
    const double first = arix_forecast(history, u, c, 4)[0];
    u[1] = u[2] = u[3] = 100.0;
    CHECK(arix_forecast(history, u, c, 4)[0] == first);
}

TEST_CASE("aggregate examples and convexity") {
    const std::vector<RuleForecast> rules{{1.0, 2.0}, {5.0, -1.0}, {0.0, 0.5}};
    const std::vector<double> one_hot{0.0, 1.0, 0.0};
    CHECK(aggregate(one_hot, rules) == rules[1]);

    const std::vector<RuleForecast> same{{0.3, 0.6}, {0.3, 0.6}};
    const std::vector<double> psi{0.2, 0.8};
    auto out = aggregate(psi, same);
    CHECK(out[0] == doctest::Approx(0.3));
    CHECK(out[1] == doctest::Approx(0.6));

    const std::vector<RuleForecast> pair{{0.0, 0.0}, {4.0, 4.0}};
    const std::vector<double> weights{0.25, 0.75};
    for (double v : aggregate(weights, pair)) CHECK(v == doctest::Approx(3.0).epsilon(1e-15));

    compute::Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<RuleForecast> forecasts(4, RuleForecast(6));
        for (auto& f : forecasts)
            for (double& v : f) v = rng.uniform(-2, 2);
        std::vector<double> w(4);
        double total = 0.0;
        for (double& x : w) total += (x = rng.uniform());
        for (double& x : w) x /= total;
        auto agg = aggregate(w, forecasts);
        for (std::size_t j = 0; j < 6; ++j) {
            double lo = 1e300, hi = -1e300;
            for (const auto& f : forecasts) lo = std::min(lo, f[j]), hi = std::max(hi, f[j]);
            CHECK((agg[j] >= lo - 1e-12 && agg[j] <= hi + 1e-12));
        }
    }
}

TEST_CASE("graph recursion agrees with plain forecasts and passes gradient checks") {
    compute::Rng rng(8);
    for (int d = 0; d <= 1; ++d) {
        CAPTURE(d);
        const std::size_t p = 3, q = 2, rules = 2, batch = 3, horizon = 5;
        std::vector<double> hist(batch * (p + d));
        for (double& v : hist) v = rng.uniform(0, 1);
        std::vector<double> u(batch * horizon), a(rules * p), b(rules * q);
        for (double& v : u) v = rng.uniform(-1, 1);
        for (double& v : a) v = rng.uniform(-0.3, 0.3);
        for (double& v : b) v = rng.uniform(-1, 1);
        auto history = compute::constant({batch, p + d}, hist);
        auto exogenous = compute::parameter({batch, horizon}, u);
        auto ar = compute::parameter({rules, p}, a);
        auto exo = compute::parameter({rules, q}, b);

        auto all = forecast_all_rules(history, exogenous, ar, exo, d);
        for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t c = 0; c < rules; ++c) {
                ArixCoefficients coeffs{{a.begin() + c * p, a.begin() + (c + 1) * p},
                                        {b.begin() + c * q, b.begin() + (c + 1) * q}, d};
                auto expect = arix_forecast(std::span(hist).subspan(s * (p + d), p + d),
                                            std::span(u).subspan(s * horizon, horizon), coeffs, horizon);
                for (std::size_t j = 0; j < horizon; ++j)
                    CHECK(all->value()[(s * rules + c) * horizon + j] == doctest::Approx(expect[j]).epsilon(1e-14));
            }

        std::vector<double> w(batch * rules * horizon);
        for (double& v : w) v = rng.uniform(-1, 1);
        auto weights = compute::constant({batch, rules, horizon}, w);
        auto build_all = [&] {
            return compute::sum(compute::mul(forecast_all_rules(history, exogenous, ar, exo, d), weights));
        };
        auto report = testing::check_gradients(build_all, {{"u", exogenous}, {"a", ar}, {"b", exo}});
        CHECK(report.max_relative_error < 1e-4);

        const std::vector<std::size_t> chosen{1, 0, 1};
        auto selected = forecast_selected_rules(history, exogenous, ar, exo, d, chosen);
        for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t j = 0; j < horizon; ++j)
                CHECK(selected->value()[s * horizon + j] == all->value()[(s * rules + chosen[s]) * horizon + j]);
        auto weights2 = compute::constant({batch, horizon}, std::vector<double>(w.begin(), w.begin() + batch * horizon));
        auto build_selected = [&] {
            return compute::sum(compute::mul(forecast_selected_rules(history, exogenous, ar, exo, d, chosen), weights2));
        };
        report = testing::check_gradients(build_selected, {{"u", exogenous}, {"a", ar}, {"b", exo}});
        CHECK(report.max_relative_error < 1e-4);
    }
}

TEST_CASE("graph aggregation reduces to the selected rule for one-hot memberships") {
    auto psi = compute::constant({2, 3}, {0, 1, 0, 1, 0, 0});
    auto forecasts = compute::constant({2, 3, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    auto out = aggregate(psi, forecasts);
    CHECK(std::vector<double>(out->value().begin(), out->value().end()) == std::vector<double>{3, 4, 7, 8});
}
