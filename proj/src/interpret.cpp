#include "fuzzformer/interpret.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "fuzzformer/compute/tensor.hpp"
#include "fuzzformer/error.hpp"
#include "fuzzformer/svg.hpp"

namespace fuzzformer::interpret {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

std::vector<double> steps(std::size_t from, std::size_t count) {
    std::vector<double> x(count);
    for (std::size_t i = 0; i < count; ++i) x[i] = static_cast<double>(from + i);
    return x;
}

}  // namespace

ForecastBundle explain(const Checkpoint& checkpoint, const data::AlignedSeries& raw) {
    const auto& cfg = checkpoint.config.model;
    const std::size_t n = cfg.encoder.window;
    const std::size_t h = cfg.encoder.horizon;
    const std::size_t dx = checkpoint.channels.size();
    if (raw.rows() < n) {
        throw DataError("forecast: window has " + std::to_string(raw.rows()) + " rows, the model needs N = " +
                        std::to_string(n));
    }
    std::vector<std::size_t> column(dx);
    for (std::size_t c = 0; c < dx; ++c) {
        const auto it = std::find(raw.channels.begin(), raw.channels.end(), checkpoint.channels[c]);
        if (it == raw.channels.end()) throw DataError("forecast: window is missing channel '" + checkpoint.channels[c] + "'");
        column[c] = static_cast<std::size_t>(it - raw.channels.begin());
    }

    ForecastBundle b;
    b.window = n;
    b.horizon = h;
    b.channels = checkpoint.channels;
    const std::size_t first = raw.rows() - n;
    std::vector<double> window(n * dx);
    for (std::size_t t = 0; t < n; ++t) {
        b.input_dates.push_back(raw.dates[first + t]);
        for (std::size_t c = 0; c < dx; ++c) {
            window[t * dx + c] = checkpoint.scaler.apply(c, raw.at(first + t, column[c]));
        }
        b.history.push_back(raw.at(first + t, column[0]));
        b.history_scaled.push_back(window[t * dx]);
    }

    compute::NoGradGuard guard;
    const std::vector<std::vector<double>> windows{window};
    const auto batch = make_batch(windows, {}, cfg);
    const auto r = checkpoint.model.forward(batch, ForwardOptions::evaluation());

    const auto forecast = r.forecast->value();
    b.forecast_scaled.assign(forecast.begin(), forecast.end());
    for (double v : b.forecast_scaled) b.forecast.push_back(checkpoint.scaler.inverse(0, v));
    const auto m = r.memberships->value();
    b.memberships.assign(m.begin(), m.end());
    b.winner = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
    const auto rules = r.rule_forecasts->value();
    for (std::size_t i = 0; i < cfg.rules; ++i) {
        std::vector<double> scaled(rules.begin() + static_cast<std::ptrdiff_t>(i * h),
                                   rules.begin() + static_cast<std::ptrdiff_t>((i + 1) * h));
        std::vector<double> original;
        for (double v : scaled) original.push_back(checkpoint.scaler.inverse(0, v));
        b.rule_forecasts_scaled.push_back(std::move(scaled));
        b.rule_forecasts.push_back(std::move(original));
    }
    const auto z = r.encoding.z_latent->value();
    b.latent.assign(z.begin(), z.end());
    b.clusters = checkpoint.model.clusters();
    b.bhattacharyya.assign(cfg.rules, std::vector<double>(cfg.rules, 0.0));
    for (std::size_t i = 0; i < cfg.rules; ++i) {
        for (std::size_t j = 0; j < cfg.rules; ++j) {
            if (i != j) b.bhattacharyya[i][j] = fuzzy::bhattacharyya(b.clusters[i], b.clusters[j]);
        }
    }
    for (const auto& layer : r.encoding.attention_weights) {
        std::vector<std::vector<double>> heads;
        for (const auto& head : layer) {
            const auto w = head->value();
            heads.emplace_back(w.begin(), w.end());
        }
        b.attention.push_back(std::move(heads));
    }
    return b;
}

void write_bundle(const ForecastBundle& b, const fs::path& dir) {
    fs::create_directories(dir);
    const std::size_t c_count = b.memberships.size();

    std::string text = "step,scaled,value\n";
    for (std::size_t k = 0; k < b.horizon; ++k) {
        text += std::to_string(k + 1) + "," + fmt(b.forecast_scaled[k]) + "," + fmt(b.forecast[k]) + "\n";
    }
    write_text(dir / "forecast.csv", text);

    text = "step,date,scaled,value\n";
    for (std::size_t t = 0; t < b.window; ++t) {
        text += std::to_string(static_cast<long>(t) - static_cast<long>(b.window) + 1) + "," + b.input_dates[t] +
                "," + fmt(b.history_scaled[t]) + "," + fmt(b.history[t]) + "\n";
    }
    write_text(dir / "history.csv", text);

    text = "rule,membership,step,scaled,value\n";
    for (std::size_t i = 0; i < c_count; ++i) {
        for (std::size_t k = 0; k < b.horizon; ++k) {
            text += std::to_string(i) + "," + fmt(b.memberships[i]) + "," + std::to_string(k + 1) + "," +
                    fmt(b.rule_forecasts_scaled[i][k]) + "," + fmt(b.rule_forecasts[i][k]) + "\n";
        }
    }
    write_text(dir / "rules.csv", text);

    const std::size_t dz = b.latent.size();
    text = "rule,membership";
    for (std::size_t d = 0; d < dz; ++d) text += ",center_" + std::to_string(d);
    for (std::size_t r = 0; r < dz; ++r) {
        for (std::size_t c = 0; c < dz; ++c) text += ",cov_" + std::to_string(r) + "_" + std::to_string(c);
    }
    text += "\n";
    for (std::size_t i = 0; i < c_count; ++i) {
        text += std::to_string(i) + "," + fmt(b.memberships[i]);
        const Eigen::MatrixXd cov = b.clusters[i].covariance();
        for (std::size_t d = 0; d < dz; ++d) text += "," + fmt(b.clusters[i].center(static_cast<Eigen::Index>(d)));
        for (Eigen::Index r = 0; r < cov.rows(); ++r) {
            for (Eigen::Index c = 0; c < cov.cols(); ++c) text += "," + fmt(cov(r, c));
        }
        text += "\n";
    }
    write_text(dir / "clusters.csv", text);

    text = "";
    for (std::size_t d = 0; d < dz; ++d) text += (d ? ",z_" : "z_") + std::to_string(d);
    text += "\n";
    for (std::size_t d = 0; d < dz; ++d) text += (d ? "," : "") + fmt(b.latent[d]);
    write_text(dir / "latent.csv", text + "\n");

    text = "rule_a,rule_b,distance\n";
    for (std::size_t i = 0; i < c_count; ++i) {
        for (std::size_t j = 0; j < c_count; ++j) {
            text += std::to_string(i) + "," + std::to_string(j) + "," + fmt(b.bhattacharyya[i][j]) + "\n";
        }
    }
    write_text(dir / "bhattacharyya.csv", text);

    text = "layer,head,query_step,key_step,weight\n";
    for (std::size_t l = 0; l < b.attention.size(); ++l) {
        for (std::size_t hd = 0; hd < b.attention[l].size(); ++hd) {
            const auto& w = b.attention[l][hd];
            for (std::size_t q = 0; q < b.window; ++q) {
                for (std::size_t k = 0; k < b.window; ++k) {
                    text += std::to_string(l) + "," + std::to_string(hd) + "," + std::to_string(q) + "," +
                            std::to_string(k) + "," + fmt(w[q * b.window + k]) + "\n";
                }
            }
        }
    }
    write_text(dir / "attention.csv", text);

    svg::Plot fc;
    fc.title = "Forecast (" + b.channels.front() + ")";
    fc.x_label = "step";
    fc.y_label = "value";
    std::vector<double> hx;
    for (std::size_t t = 0; t < b.window; ++t) hx.push_back(static_cast<double>(t) - static_cast<double>(b.window) + 1);
    fc.series.push_back({"history", hx, b.history, "#333333", false, 1.5, false});
    for (std::size_t i = 0; i < c_count; ++i) {
        char label[64];
        std::snprintf(label, sizeof label, "rule %zu (%.2f)", i, b.memberships[i]);
        std::vector<double> y{b.history.back()};
        y.insert(y.end(), b.rule_forecasts[i].begin(), b.rule_forecasts[i].end());
        fc.series.push_back({c_count <= 8 ? label : "", steps(0, b.horizon + 1), y, svg::color(i + 1), true, 1.0, false});
    }
    std::vector<double> y{b.history.back()};
    y.insert(y.end(), b.forecast.begin(), b.forecast.end());
    fc.series.push_back({"aggregate", steps(0, b.horizon + 1), y, svg::color(0), false, 2.5, false});
    svg::write_file(dir / "forecast.svg", svg::render(fc));

    if (dz >= 2) {
        svg::Plot cl;
        cl.title = dz == 2 ? "Clusters in latent space" : "Clusters (latent dims 0 and 1)";
        cl.x_label = "z_0";
        cl.y_label = "z_1";
        cl.equal_aspect = true;
        for (std::size_t i = 0; i < c_count; ++i) {
            const Eigen::MatrixXd cov = b.clusters[i].covariance();
            const double cx = b.clusters[i].center(0), cy = b.clusters[i].center(1);
            cl.series.push_back(svg::ellipse(cx, cy, cov(0, 0), cov(0, 1), cov(1, 1), 2.0,
                                             c_count <= 8 ? "rule " + std::to_string(i) : "", svg::color(i + 1)));
            cl.series.push_back({"", {cx}, {cy}, svg::color(i + 1), false, 1.5, true});
        }
        cl.series.push_back({"this window", {b.latent[0]}, {b.latent[1]}, "#000000", false, 2.5, true});
        svg::write_file(dir / "clusters.svg", svg::render(cl, 640, 520));
    }

    if (!b.attention.empty() && !b.attention.back().empty()) {
        const auto& last = b.attention.back();
        std::vector<double> mean(b.window * b.window, 0.0);
        for (const auto& w : last) {
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += w[i] / static_cast<double>(last.size());
        }
        svg::write_file(dir / "attention.svg",
                        svg::heatmap("Attention (last layer, mean over heads)", "key step", "query step", b.window,
                                     b.window, mean));
    }
}

std::string loss_csv_header() { return "epoch,mse,fcm,overlap,balance,composite,valid_rmse\n"; }

std::string loss_csv_row(const training::EpochLog& l) {
    return std::to_string(l.epoch) + "," + fmt(l.mse) + "," + fmt(l.fcm) + "," + fmt(l.overlap) + "," +
           fmt(l.balance) + "," + fmt(l.composite) + "," + fmt(l.valid_rmse) + "\n";
}

std::string loss_svg(const std::vector<training::EpochLog>& history) {
    svg::Plot p;
    p.title = "Training losses (log10)";
    p.x_label = "epoch";
    p.y_label = "log10 value";
    const char* names[] = {"mse", "fcm", "overlap", "balance", "valid rmse"};
    for (int k = 0; k < 5; ++k) {
        svg::Series s;
        s.label = names[k];
        s.color = svg::color(static_cast<std::size_t>(k));
        s.dashed = k == 4;
        for (const auto& l : history) {
            const double v = k == 0 ? l.mse : k == 1 ? l.fcm : k == 2 ? l.overlap : k == 3 ? l.balance : l.valid_rmse;
            if (v > 0.0 && std::isfinite(v)) {
                s.x.push_back(static_cast<double>(l.epoch));
                s.y.push_back(std::log10(v));
            }
        }
        p.series.push_back(std::move(s));
    }
    return svg::render(p);
}

std::string forecasts_csv(const training::Evaluation& ev) {
    std::string out = "start,step,forecast,target\n";
    for (std::size_t i = 0; i < ev.forecasts.size(); ++i) {
        for (std::size_t k = 0; k < ev.forecasts[i].size(); ++k) {
            out += std::to_string(ev.starts[i]) + "," + std::to_string(k + 1) + "," + fmt(ev.forecasts[i][k]) + "," +
                   fmt(ev.targets[i][k]) + "\n";
        }
    }
    return out;
}

std::string step_rmse_csv(const training::Evaluation& ev) {
    std::string out = "step,rmse\n";
    for (std::size_t k = 0; k < ev.step_rmse.size(); ++k) out += std::to_string(k + 1) + "," + fmt(ev.step_rmse[k]) + "\n";
    return out;
}

}  // namespace fuzzformer::interpret
