#include "fuzzformer/model.hpp"

#include "fuzzformer/arix.hpp"
#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"

namespace fuzzformer {

using compute::Tensor;

namespace {

constexpr double kArixInitBound = 0.01;

Tensor small_uniform(compute::Shape shape, compute::Rng& rng) {
    std::vector<double> v(compute::element_count(shape));
    for (double& x : v) x = rng.uniform(-kArixInitBound, kArixInitBound);
    return compute::parameter(std::move(shape), std::move(v));
}

std::vector<double> diagonal_factors(std::size_t rules, std::size_t d, double spread) {
    std::vector<double> f(rules * d * d, 0.0);
    for (std::size_t c = 0; c < rules; ++c)
        for (std::size_t i = 0; i < d; ++i) f[(c * d + i) * d + i] = spread;
    return f;
}

}  // namespace

void ModelConfig::validate() const {
    encoder.validate();
    if (rules == 0) throw ConfigError("model: at least one fuzzy rule is required");
    if (ar_order == 0) throw ConfigError("model: AR order p must be at least 1");
    if (integration != 0 && integration != 1) throw ConfigError("model: integration order d must be 0 or 1");
    if (encoder.window < history_length()) {
        throw ConfigError("model: window N = " + std::to_string(encoder.window) +
                          " is shorter than p + d = " + std::to_string(history_length()));
    }
    if (covariance_epsilon <= 0.0) throw ConfigError("model: covariance epsilon must be positive");
}

Batch make_batch(std::span<const std::vector<double>> windows, std::span<const std::vector<double>> targets,
                 const ModelConfig& config) {
    const std::size_t n = config.encoder.window;
    const std::size_t dx = config.encoder.input_dim;
    const std::size_t h = config.encoder.horizon;
    const std::size_t hist = config.history_length();
    const std::size_t batch = windows.size();
    if (batch == 0) throw ShapeError("make_batch: empty batch");
    std::vector<double> x;
    std::vector<double> history;
    x.reserve(batch * n * dx);
    history.reserve(batch * hist);
    for (const auto& w : windows) {
        if (w.size() != n * dx) {
            throw ShapeError("make_batch: window has " + std::to_string(w.size()) + " values, expected N x D_X = " +
                             std::to_string(n * dx));
        }
        x.insert(x.end(), w.begin(), w.end());
        for (std::size_t t = n - hist; t < n; ++t) history.push_back(w[t * dx]);
    }
    Batch out{compute::constant({batch, n, dx}, std::move(x)), compute::constant({batch, hist}, std::move(history)),
              nullptr};
    if (!targets.empty()) {
        if (targets.size() != batch) throw ShapeError("make_batch: target count differs from window count");
        std::vector<double> y;
        y.reserve(batch * h);
        for (const auto& t : targets) {
            if (t.size() != h) throw ShapeError("make_batch: target length differs from horizon H");
            y.insert(y.end(), t.begin(), t.end());
        }
        out.targets = compute::constant({batch, h}, std::move(y));
    }
    return out;
}

FuzzformerModel FuzzformerModel::create(const ModelConfig& config, compute::Rng& rng) {
    config.validate();
    FuzzformerModel m;
    m.config_ = config;
    m.encoder = encoder::EncoderParams::create(config.encoder, rng);
    const std::size_t dz = config.encoder.latent_dim;
    std::vector<double> centers(config.rules * dz);
    for (double& c : centers) c = rng.uniform(-1.0, 1.0);
    m.centers = compute::parameter({config.rules, dz}, std::move(centers));
    m.factors = compute::parameter({config.rules, dz, dz}, diagonal_factors(config.rules, dz, config.initial_spread));
    m.ar = small_uniform({config.rules, config.ar_order}, rng);
    m.exo = small_uniform({config.rules, config.exo_order}, rng);
    return m;
}

ForwardResult FuzzformerModel::forward(const Batch& batch, const ForwardOptions& options) const {
    ForwardResult r;
    r.encoding = encoder::encode_window(batch.windows, config_.encoder, encoder,
                                        {options.dropout, options.rng});
    r.covariances = fuzzy::covariance_from_factor(factors, config_.covariance_epsilon);
    r.distances_sq = fuzzy::mahalanobis_sq(r.encoding.z_latent, centers, r.covariances);
    r.memberships = fuzzy::memberships(r.distances_sq);
    const std::size_t rules = config_.rules;
    auto d2 = r.distances_sq->value();
    r.winners.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        r.winners.push_back(fuzzy::hardmax_from_distances(d2.subspan(b * rules, rules)));
    }
    if (options.winner_takes_all) {
        r.forecast = arix::forecast_selected_rules(batch.history, r.encoding.u_latent, ar, exo,
                                                   config_.integration, r.winners);
    } else {
        r.rule_forecasts = arix::forecast_all_rules(batch.history, r.encoding.u_latent, ar, exo,
                                                    config_.integration);
        r.forecast = arix::aggregate(r.memberships, r.rule_forecasts);
    }
    return r;
}

void FuzzformerModel::initialize_clusters(const Batch& warmup) {
    compute::NoGradGuard guard;
    const std::size_t dz = config_.encoder.latent_dim;
    auto enc = encoder::encode_window(warmup.windows, config_.encoder, encoder);
    auto z = enc.z_latent->value();
    auto c = centers->mutable_value();
    const std::size_t available = warmup.size();
    for (std::size_t r = 0; r < config_.rules; ++r) {
        const std::size_t src = r % available;
        for (std::size_t i = 0; i < dz; ++i) c[r * dz + i] = z[src * dz + i];
    }
    auto f = diagonal_factors(config_.rules, dz, config_.initial_spread);
    std::copy(f.begin(), f.end(), factors->mutable_value().begin());
}

std::vector<fuzzy::GaussianCluster> FuzzformerModel::clusters() const {
    return fuzzy::clusters_from(centers, factors, config_.covariance_epsilon);
}

std::vector<std::pair<std::string, Tensor>> FuzzformerModel::named_parameters() const {
    auto out = encoder.named_parameters();
    out.emplace_back("fuzzy.centers", centers);
    out.emplace_back("fuzzy.factors", factors);
    out.emplace_back("arix.ar", ar);
    out.emplace_back("arix.exo", exo);
    return out;
}

std::vector<Tensor> FuzzformerModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

}  // namespace fuzzformer
