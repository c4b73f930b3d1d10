#include "doctest.h"

#include <cmath>
#include <cstring>

#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/encoder.hpp"
#include "fuzzformer/error.hpp"
#include "support/gradcheck.hpp"

using namespace fuzzformer;
using namespace fuzzformer::encoder;
using compute::Tensor;

namespace {

void fill(const Tensor& t, double value) {
    for (double& x : t->mutable_value()) x = value;
}

Tensor random_window(compute::Shape shape, compute::Rng& rng) {
    std::vector<double> v(compute::element_count(shape));
    for (double& x : v) x = rng.uniform(0, 1);
    return compute::constant(std::move(shape), std::move(v));
}

EncoderConfig tiny_config() {
    EncoderConfig c;
    c.input_dim = 2;
    c.window = 4;
    c.horizon = 3;
    c.hidden = 3;
    c.heads = 1;
    c.lstm_layers = 2;
    c.attention_layers = 2;
    c.latent_dim = 2;
    c.dropout = 0.2;
    return c;
}

}  // namespace

TEST_CASE("lstm_step examples") {
    compute::Rng rng(1);
    auto params = LstmLayerParams::create(2, 3, rng);
    auto x = compute::constant({1, 2}, {0.4, 0.9});
    auto h = compute::constant({1, 3}, {0.1, -0.2, 0.3});
    auto c = compute::constant({1, 3}, {0.5, -0.5, 2.0});

    SUBCASE("zero network") {
        fill(params.input_weights, 0.0);
        fill(params.recurrent_weights, 0.0);
        fill(params.bias, 0.0);
        auto next = lstm_step(x, {h, compute::zeros({1, 3})}, params);
        for (double v : next.hidden->value()) CHECK(v == 0.0);
        for (double v : next.cell->value()) CHECK(v == 0.0);
    }
    SUBCASE("saturated forget gate carries the cell") {
        fill(params.input_weights, 0.0);
        fill(params.recurrent_weights, 0.0);
        fill(params.bias, 0.0);
        for (std::size_t i = 3; i < 6; ++i) params.bias->mutable_value()[i] = 50.0;
        auto next = lstm_step(x, {h, c}, params);
        for (std::size_t i = 0; i < 3; ++i) CHECK(next.cell->value()[i] == doctest::Approx(c->value()[i]).epsilon(1e-15));
    }
    SUBCASE("deterministic") {
        auto a = lstm_step(x, {h, c}, params);
        auto b = lstm_step(x, {h, c}, params);
        CHECK(std::memcmp(a.hidden->value().data(), b.hidden->value().data(), 3 * sizeof(double)) == 0);
        CHECK(std::memcmp(a.cell->value().data(), b.cell->value().data(), 3 * sizeof(double)) == 0);
    }
    CHECK_THROWS_AS(lstm_step(compute::zeros({1, 5}), {h, c}, params), ShapeError);
}

TEST_CASE("encode_window examples") {
    compute::Rng rng(2);
    auto config = tiny_config();
    auto params = EncoderParams::create(config, rng);
    auto window = random_window({2, 4, 2}, rng);

    SUBCASE("zero network") {
        for (auto& [name, t] : params.named_parameters()) fill(t, 0.0);
        auto out = encode_window(window, config, params);
        for (double v : out.z_latent->value()) CHECK(v == 0.0);
        for (double v : out.u_latent->value()) CHECK(v == 0.0);
        CHECK(out.u_latent->shape() == compute::Shape{2, 3});
    }
    SUBCASE("full dropout zeroes the attended features") {
        config.dropout = 1.0;
        compute::Rng mask_rng(3);
        auto out = encode_window(window, config, params, {true, &mask_rng});
        for (double v : out.attended->value()) CHECK(v == 0.0);
    }
    SUBCASE("evaluation mode is pure") {
        auto a = encode_window(window, config, params);
        auto b = encode_window(window, config, params);
        CHECK(std::memcmp(a.z_latent->value().data(), b.z_latent->value().data(), 4 * sizeof(double)) == 0);
        CHECK(std::memcmp(a.u_latent->value().data(), b.u_latent->value().data(), 6 * sizeof(double)) == 0);
    }
    SUBCASE("window and channel checks") {
        CHECK_THROWS_AS(encode_window(random_window({1, 5, 2}, rng), config, params), ShapeError);
        CHECK_THROWS_AS(encode_window(random_window({1, 4, 3}, rng), config, params), ShapeError);
    }
}

TEST_CASE("hidden states stay within the unit interval") {
    compute::Rng rng(4);
    auto params = LstmLayerParams::create(3, 8, rng);
    for (double& w : params.input_weights->mutable_value()) w *= 10.0;
    auto h = run_lstm(random_window({4, 20, 3}, rng), params);
    for (double v : h->value()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("encoder gradients match finite differences") {
    compute::Rng rng(5);
    auto config = tiny_config();
    auto params = EncoderParams::create(config, rng);
    auto window = random_window({2, 4, 2}, rng);
    std::vector<double> wz(4), wu(6);
    for (double& x : wz) x = rng.uniform(-1, 1);
    for (double& x : wu) x = rng.uniform(-1, 1);
    auto weight_z = compute::constant({2, 2}, wz);
    auto weight_u = compute::constant({2, 3}, wu);
    auto build = [&] {
        compute::Rng mask_rng(17);  // same mask on every evaluation
        auto out = encode_window(window, config, params, {true, &mask_rng});
        return compute::add(compute::sum(compute::mul(out.z_latent, weight_z)),
                            compute::sum(compute::mul(out.u_latent, weight_u)));
    };
    auto report = testing::check_gradients(build, params.named_parameters());
    CAPTURE(report.worst_leaf);
    CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("temporal order reaches the latent only through the LSTM") {
    compute::Rng rng(6);
    auto config = tiny_config();
    config.input_dim = 3;
    config.heads = 3;
    auto params = EncoderParams::create(config, rng);
    auto window = random_window({1, 4, 3}, rng);
    std::vector<double> reversed(12);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t c = 0; c < 3; ++c) reversed[t * 3 + c] = window->value()[(3 - t) * 3 + c];
    auto flipped = compute::constant({1, 4, 3}, reversed);

    // Attention stack alone is permutation-equivariant, so its time mean is unchanged.
    auto pooled = [&](const Tensor& seq) {
        Tensor x = seq;
        for (const auto& block : params.attention) x = compute::add(x, attention::multi_head(x, block).output);
        return compute::mean_axis(x, 1);
    };
    auto a = pooled(window);
    auto b = pooled(flipped);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a->value()[i] == doctest::Approx(b->value()[i]).epsilon(1e-12));

    auto with_lstm = encode_window(window, config, params).z_latent;
    auto with_lstm_flipped = encode_window(flipped, config, params).z_latent;
    CHECK(std::abs(with_lstm->value()[0] - with_lstm_flipped->value()[0]) > 1e-6);
}
