#include "fuzzformer/arix.hpp"

#include <cmath>
#include <string>

#include "fuzzformer/compute/ops.hpp"
#include "fuzzformer/error.hpp"

namespace fuzzformer::arix {

using compute::Tensor;
using compute::TensorNode;

namespace {

struct Dims {
    std::size_t p;
    std::size_t q;
    std::size_t horizon;
    int d;
};

// Observed (differenced when d = 1) values before the origin:
// past[t] = v(-t) for t = 0 .. p-1.
void fill_past(const double* hist, const Dims& dims, double* past) {
    const std::size_t last = dims.p + static_cast<std::size_t>(dims.d) - 1;
    for (std::size_t t = 0; t < dims.p; ++t) {
        past[t] = dims.d == 1 ? hist[last - t] - hist[last - t - 1] : hist[last - t];
    }
}

// Runs the recursion for one (sample, rule). `steps` receives the (differenced)
// recursive outputs s_1..s_H, `out` the forecast levels.
void run_recursion(const double* hist, const double* u, const double* a, const double* b,
                   const Dims& dims, double* steps, double* out) {
    std::vector<double> past(dims.p);
    fill_past(hist, dims, past.data());
    const double level = hist[dims.p + static_cast<std::size_t>(dims.d) - 1];
    double running = level;
    for (std::size_t j = 1; j <= dims.horizon; ++j) {
        double s = 0.0;
        for (std::size_t m = 1; m <= dims.p; ++m) {
            const double v = j > m ? steps[j - m - 1] : past[m - j];
            s -= a[m - 1] * v;
        }
        for (std::size_t n = 1; n <= dims.q && n <= j; ++n) s += b[n - 1] * u[j - n];
        steps[j - 1] = s;
        if (dims.d == 1) {
            running += s;
            out[j - 1] = running;
        } else {
            out[j - 1] = s;
        }
    }
}

// Adjoint sweep of run_recursion. Accumulates into ga, gb, gu.
void reverse_recursion(const double* hist, const double* u, const double* a, const double* b,
                       const Dims& dims, const double* steps, const double* g_out, double* ga,
                       double* gb, double* gu) {
    const std::size_t h = dims.horizon;
    std::vector<double> past(dims.p);
    fill_past(hist, dims, past.data());
    std::vector<double> g_steps(h);
    double suffix = 0.0;
    for (std::size_t j = h; j-- > 0;) {
        if (dims.d == 1) {
            suffix += g_out[j];
            g_steps[j] = suffix;
        } else {
            g_steps[j] = g_out[j];
        }
    }
    std::vector<double> lambda(h, 0.0);
    for (std::size_t j = h; j >= 1; --j) {
        double acc = g_steps[j - 1];
        for (std::size_t m = 1; m <= dims.p && j + m <= h; ++m) acc -= a[m - 1] * lambda[j + m - 1];
        lambda[j - 1] = acc;
    }
    for (std::size_t j = 1; j <= h; ++j) {
        const double lj = lambda[j - 1];
        if (lj == 0.0) continue;
        if (ga) {
            for (std::size_t m = 1; m <= dims.p; ++m) {
                const double v = j > m ? steps[j - m - 1] : past[m - j];
                ga[m - 1] -= lj * v;
            }
        }
        for (std::size_t n = 1; n <= dims.q && n <= j; ++n) {
            if (gb) gb[n - 1] += lj * u[j - n];
            if (gu) gu[j - n] += lj * b[n - 1];
        }
    }
}

Dims check_shapes(const char* op, const Tensor& history, const Tensor& exogenous,
                  const Tensor& ar, const Tensor& exo, int integration) {
    if (integration != 0 && integration != 1) {
        throw ConfigError(std::string(op) + ": integration order must be 0 or 1");
    }
    if (history->rank() != 2 || exogenous->rank() != 2 || ar->rank() != 2 || exo->rank() != 2 ||
        history->dim(0) != exogenous->dim(0) || ar->dim(0) != exo->dim(0) || ar->dim(1) < 1 ||
        history->dim(1) != ar->dim(1) + static_cast<std::size_t>(integration)) {
        throw ShapeError(std::string(op) + ": incompatible shapes history " +
                         compute::to_string(history->shape()) + ", exogenous " +
                         compute::to_string(exogenous->shape()) + ", ar " +
                         compute::to_string(ar->shape()) + ", exo " + compute::to_string(exo->shape()));
    }
    return {ar->dim(1), exo->dim(1), exogenous->dim(1), integration};
}

void check_finite(const double* out, std::size_t n, std::size_t rule) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(out[i])) {
            throw NonFiniteError("arix_forecast: rule " + std::to_string(rule) +
                                 " produced a non-finite forecast (unstable AR polynomial)");
        }
    }
}

}  // namespace

void ArixCoefficients::validate() const {
    if (ar.empty()) throw ConfigError("ArixCoefficients: AR order p must be at least 1");
    if (integration != 0 && integration != 1) {
        throw ConfigError("ArixCoefficients: integration order must be 0 or 1");
    }
}

RuleForecast arix_forecast(std::span<const double> history, std::span<const double> u_seq,
                           const ArixCoefficients& coeffs, std::size_t horizon) {
    coeffs.validate();
    const Dims dims{coeffs.ar.size(), coeffs.exo.size(), horizon, coeffs.integration};
    const std::size_t need = coeffs.history_length();
    if (history.size() < need) {
        throw DataError("arix_forecast: history has " + std::to_string(history.size()) +
                        " values, needs p + d = " + std::to_string(need));
    }
    if (dims.q > 0 && u_seq.size() < horizon) {
        throw ShapeError("arix_forecast: exogenous sequence shorter than horizon");
    }
    std::vector<double> u(horizon, 0.0);
    for (std::size_t i = 0; i < horizon && i < u_seq.size(); ++i) u[i] = u_seq[i];
    std::vector<double> steps(horizon);
    RuleForecast out(horizon);
    run_recursion(history.data() + (history.size() - need), u.data(), coeffs.ar.data(),
                  coeffs.exo.data(), dims, steps.data(), out.data());
    check_finite(out.data(), horizon, 0);
    return out;
}

std::vector<double> aggregate(std::span<const double> memberships,
                              std::span<const RuleForecast> rule_forecasts) {
    if (memberships.size() != rule_forecasts.size() || rule_forecasts.empty()) {
        throw ShapeError("aggregate: membership count does not match rule count");
    }
    const std::size_t horizon = rule_forecasts.front().size();
    std::vector<double> out(horizon, 0.0);
    for (std::size_t i = 0; i < rule_forecasts.size(); ++i) {
        if (rule_forecasts[i].size() != horizon) throw ShapeError("aggregate: ragged rule forecasts");
        for (std::size_t j = 0; j < horizon; ++j) out[j] += memberships[i] * rule_forecasts[i][j];
    }
    return out;
}

Tensor forecast_all_rules(const Tensor& history, const Tensor& exogenous, const Tensor& ar,
                          const Tensor& exo, int integration) {
    const Dims dims = check_shapes("forecast_all_rules", history, exogenous, ar, exo, integration);
    const std::size_t batch = history->dim(0);
    const std::size_t rules = ar->dim(0);
    const std::size_t hist_len = history->dim(1);
    const std::size_t h = dims.horizon;
    std::vector<double> out(batch * rules * h);
    std::vector<double> steps(batch * rules * h);
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t c = 0; c < rules; ++c) {
            const std::size_t o = (s * rules + c) * h;
            run_recursion(history->value().data() + s * hist_len, exogenous->value().data() + s * h,
                          ar->value().data() + c * dims.p, exo->value().data() + c * dims.q, dims,
                          steps.data() + o, out.data() + o);
            check_finite(out.data() + o, h, c);
        }
    TensorNode *ph = history.get(), *pu = exogenous.get(), *pa = ar.get(), *pb = exo.get();
    return compute::make_node(
        "arix_forecast", {batch, rules, h}, std::move(out), {history, exogenous, ar, exo},
        [ph, pu, pa, pb, dims, batch, rules, hist_len, steps = std::move(steps)](const TensorNode& self) {
            const std::size_t h = dims.horizon;
            for (std::size_t s = 0; s < batch; ++s)
                for (std::size_t c = 0; c < rules; ++c) {
                    const std::size_t o = (s * rules + c) * h;
                    reverse_recursion(
                        ph->value().data() + s * hist_len, pu->value().data() + s * h,
                        pa->value().data() + c * dims.p, pb->value().data() + c * dims.q, dims,
                        steps.data() + o, self.grad().data() + o,
                        pa->requires_grad() ? pa->mutable_grad().data() + c * dims.p : nullptr,
                        pb->requires_grad() ? pb->mutable_grad().data() + c * dims.q : nullptr,
                        pu->requires_grad() ? pu->mutable_grad().data() + s * h : nullptr);
                }
        });
}

Tensor forecast_selected_rules(const Tensor& history, const Tensor& exogenous, const Tensor& ar,
                               const Tensor& exo, int integration,
                               std::span<const std::size_t> rules) {
    const Dims dims = check_shapes("forecast_selected_rules", history, exogenous, ar, exo, integration);
    const std::size_t batch = history->dim(0);
    const std::size_t hist_len = history->dim(1);
    const std::size_t h = dims.horizon;
    if (rules.size() != batch) throw ShapeError("forecast_selected_rules: one rule index per sample");
    for (auto r : rules) {
        if (r >= ar->dim(0)) throw ShapeError("forecast_selected_rules: rule index out of range");
    }
    std::vector<double> out(batch * h);
    std::vector<double> steps(batch * h);
    for (std::size_t s = 0; s < batch; ++s) {
        run_recursion(history->value().data() + s * hist_len, exogenous->value().data() + s * h,
                      ar->value().data() + rules[s] * dims.p, exo->value().data() + rules[s] * dims.q,
                      dims, steps.data() + s * h, out.data() + s * h);
        check_finite(out.data() + s * h, h, rules[s]);
    }
    TensorNode *ph = history.get(), *pu = exogenous.get(), *pa = ar.get(), *pb = exo.get();
    std::vector<std::size_t> chosen(rules.begin(), rules.end());
    return compute::make_node(
        "arix_forecast_selected", {batch, h}, std::move(out), {history, exogenous, ar, exo},
        [ph, pu, pa, pb, dims, batch, hist_len, chosen = std::move(chosen),
         steps = std::move(steps)](const TensorNode& self) {
            const std::size_t h = dims.horizon;
            for (std::size_t s = 0; s < batch; ++s) {
                const std::size_t c = chosen[s];
                reverse_recursion(
                    ph->value().data() + s * hist_len, pu->value().data() + s * h,
                    pa->value().data() + c * dims.p, pb->value().data() + c * dims.q, dims,
                    steps.data() + s * h, self.grad().data() + s * h,
                    pa->requires_grad() ? pa->mutable_grad().data() + c * dims.p : nullptr,
                    pb->requires_grad() ? pb->mutable_grad().data() + c * dims.q : nullptr,
                    pu->requires_grad() ? pu->mutable_grad().data() + s * h : nullptr);
            }
        });
}

Tensor aggregate(const Tensor& memberships, const Tensor& rule_forecasts) {
    if (memberships->rank() != 2 || rule_forecasts->rank() != 3 ||
        memberships->dim(0) != rule_forecasts->dim(0) || memberships->dim(1) != rule_forecasts->dim(1)) {
        throw ShapeError("aggregate: incompatible shapes " + compute::to_string(memberships->shape()) +
                         ", " + compute::to_string(rule_forecasts->shape()));
    }
    const std::size_t batch = memberships->dim(0);
    const std::size_t rules = memberships->dim(1);
    const std::size_t h = rule_forecasts->dim(2);
    auto weights = compute::reshape(memberships, {batch, 1, rules});
    return compute::reshape(compute::matmul(weights, rule_forecasts), {batch, h});
}

}  // namespace fuzzformer::arix
