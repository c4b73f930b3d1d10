#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fuzzformer/baselines.hpp"
#include "fuzzformer/checkpoint.hpp"
#include "fuzzformer/config.hpp"
#include "fuzzformer/data.hpp"
#include "fuzzformer/error.hpp"
#include "fuzzformer/fetch.hpp"
#include "fuzzformer/interpret.hpp"
#include "fuzzformer/report.hpp"
#include "fuzzformer/svg.hpp"
#include "fuzzformer/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fuzzformer;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

std::vector<data::Split> parse_splits(const std::string& name) {
    if (name == "all") return {data::Split::train, data::Split::valid, data::Split::test};
    try {
        return {data::parse_split(name)};
    } catch (const DataError&) {
        throw ConfigError("--split must be train, valid, test or all");
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---- synth ------------------------------------------------------------

struct SynthArgs {
    data::SyntheticOptions options;
    std::string output;
};

void run_synth(const SynthArgs& a) {
    const auto manifest = data::write_synthetic(a.options, a.output);
    const auto& o = a.options;
    write_json(fs::path(a.output) / "config.json",
               {{"command", "synth"}, {"rows", o.rows}, {"seed", o.seed}, {"period", o.period},
                {"amplitude", o.amplitude}, {"trend", o.trend}, {"ar1", o.ar1}, {"ar2", o.ar2}, {"noise", o.noise},
                {"start_date", o.start_date}, {"output", a.output}, {"manifest", manifest.string()}});
    std::cout << "wrote " << manifest.string() << "\n";
}

// ---- fetch ------------------------------------------------------------

struct FetchArgs {
    std::string url;
    std::string output;
    std::string cache_dir;
};

void run_fetch(const FetchArgs& a) {
    const fs::path cache = a.cache_dir.empty() ? data::default_cache_dir() : fs::path(a.cache_dir);
    const auto series = data::fetch_http(a.url, cache);
    const fs::path out(a.output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    data::write_csv(series, out);
    write_json(out.string() + ".config.json",
               {{"command", "fetch"}, {"url", a.url}, {"output", a.output}, {"cache_dir", cache.string()}});
    std::cout << "fetched " << series.observations.size() << " observations of " << series.name << " into "
              << out.string() << "\n";
}

// ---- prepare ----------------------------------------------------------

struct PrepareArgs {
    std::string manifest;
    std::vector<std::string> csv;
    std::size_t window = 60;
    std::size_t horizon = 30;
    std::size_t stride = 1;
    std::string output;
    std::string cache_dir;
};

void run_prepare(const PrepareArgs& a) {
    data::Manifest manifest;
    if (!a.manifest.empty()) {
        manifest = data::load_manifest(a.manifest);
    } else {
        for (std::size_t i = 0; i < a.csv.size(); ++i) {
            const bool url = data::is_url(a.csv[i]);
            const std::string source = url ? a.csv[i] : fs::absolute(a.csv[i]).string();
            std::string name = fs::path(a.csv[i]).stem().string();
            manifest.channels.push_back({name, source, i == 0 ? "main" : "exogenous", "", ""});
        }
    }
    if (manifest.channels.empty()) throw ConfigError("prepare: give --manifest or at least one --csv");
    const fs::path cache = a.cache_dir.empty() ? data::default_cache_dir() : fs::path(a.cache_dir);
    const auto series = data::load_sources(manifest, cache);
    const auto aligned = data::align(series);
    const auto ds = data::make_windows(aligned, a.window, a.horizon, a.stride);

    const fs::path out(a.output);
    fs::create_directories(out);
    data::save_dataset(ds, out / "dataset.txt");
    data::write_wide_csv(aligned, out / "aligned.csv");
    data::save_manifest(manifest, out / "manifest.json");
    const auto train_rows = ds.plan.training_rows();
    write_json(out / "config.json",
               {{"command", "prepare"},
                {"manifest", a.manifest},
                {"csv", a.csv},
                {"window", a.window},
                {"horizon", a.horizon},
                {"stride", a.stride},
                {"output", a.output},
                {"cache_dir", cache.string()},
                {"rows", ds.rows()},
                {"channels", ds.channels},
                {"first_date", ds.dates.empty() ? "" : ds.dates.front()},
                {"last_date", ds.dates.empty() ? "" : ds.dates.back()},
                {"samples",
                 {{"train", ds.samples(data::Split::train).size()},
                  {"valid", ds.samples(data::Split::valid).size()},
                  {"test", ds.samples(data::Split::test).size()},
                  {"embargoed", ds.plan.embargoed}}},
                {"scaler_rows", {train_rows.begin, train_rows.end}}});
    std::cout << "prepared " << ds.rows() << " rows x " << ds.cols() << " channels: "
              << ds.samples(data::Split::train).size() << " train / " << ds.samples(data::Split::valid).size()
              << " valid / " << ds.samples(data::Split::test).size() << " test windows ("
              << ds.plan.embargoed << " embargoed)\n";
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::map<std::string, std::string> overrides;
    bool quiet = false;
};

RunConfig apply_overrides(RunConfig base, const std::map<std::string, std::string>& overrides) {
    json j = json::object();
    for (const auto& [key, text] : overrides) {
        if (key == "dataset" || key == "output") {
            j[key] = text;
            continue;
        }
        try {
            j[key] = json::parse(text);
        } catch (const json::parse_error&) {
            throw ConfigError("--" + key + ": cannot parse '" + text + "'");
        }
    }
    return run_config_from_json(j, std::move(base));
}

void run_train(const TrainArgs& a) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    cfg = apply_overrides(cfg, a.overrides);
    if (cfg.dataset.empty()) throw ConfigError("train: --dataset is required (or set \"dataset\" in the config file)");
    if (cfg.output.empty()) throw ConfigError("train: --output is required (or set \"output\" in the config file)");
    const auto ds = data::load_dataset(cfg.dataset);
    cfg.resolve(ds);
    cfg.validate();

    const fs::path out(cfg.output);
    fs::create_directories(out);
    save_run_config(cfg, out / "config.json");

    compute::Rng init_rng(cfg.train.seed);
    auto model = FuzzformerModel::create(cfg.model, init_rng);
    std::ofstream loss(out / "loss.csv");
    loss << interpret::loss_csv_header() << std::flush;
    const auto on_epoch = [&](const training::EpochLog& log) {
        loss << interpret::loss_csv_row(log) << std::flush;
        if (!loss) throw DataError("train: cannot write loss.csv");
        if (!a.quiet) {
            std::cout << "epoch " << log.epoch << "/" << cfg.train.epochs << "  mse " << fmt(log.mse) << "  fcm "
                      << fmt(log.fcm) << "  overlap " << fmt(log.overlap) << "  balance " << fmt(log.balance)
                      << "  valid rmse " << fmt(log.valid_rmse) << std::endl;
        }
    };
    const auto summary = training::train(model, ds, cfg.train, on_epoch);
    save_checkpoint(make_checkpoint(cfg, ds, model, summary), out / "checkpoint.ffc");
    svg::write_file(out / "loss.svg", interpret::loss_svg(summary.history));
    write_json(out / "summary.json", {{"epochs", summary.history.size()},
                                      {"best_epoch", summary.best_epoch},
                                      {"best_valid_rmse", summary.best_valid_rmse},
                                      {"seconds", summary.seconds}});
    std::cout << "best epoch " << summary.best_epoch << ", validation RMSE " << fmt(summary.best_valid_rmse)
              << "; checkpoint " << (out / "checkpoint.ffc").string() << "\n";
}

// ---- evaluate ---------------------------------------------------------

struct EvaluateArgs {
    std::string checkpoint;
    std::string dataset;
    std::string split = "all";
    std::string output;
    std::string method = "Fuzzformer";
};

std::string model_label(const ModelConfig& m) {
    return "C=" + std::to_string(m.rules) + ",D_h=" + std::to_string(m.encoder.hidden) +
           ",p=" + std::to_string(m.ar_order);
}

void print_table(const std::vector<report::ResultRow>& rows) {
    if (!rows.empty()) std::cout << report::render_text(report::build_table(rows));
}

void run_evaluate(const EvaluateArgs& a) {
    const auto ck = load_checkpoint(a.checkpoint);
    const auto ds = data::load_dataset(a.dataset);
    check_compatible(ck, ds);
    const fs::path out(a.output);
    fs::create_directories(out);
    json cfg = hyperparameters_json(ck.config);
    cfg["command"] = "evaluate";
    cfg["checkpoint"] = a.checkpoint;
    cfg["dataset"] = a.dataset;
    cfg["split"] = a.split;
    cfg["method"] = a.method;
    cfg["output"] = a.output;
    write_json(out / "config.json", cfg);

    std::vector<report::ResultRow> rows;
    const auto setting = report::setting_label(ds.window(), ds.horizon());
    for (auto split : parse_splits(a.split)) {
        const auto ev = training::evaluate(ck.model, ds, split);
        const std::string name = data::split_name(split);
        if (ev.forecasts.empty()) {
            std::cerr << "note: the " << name << " split is empty; no RMSE reported\n";
            continue;
        }
        write_text(out / ("forecasts_" + name + ".csv"), interpret::forecasts_csv(ev));
        write_text(out / ("step_rmse_" + name + ".csv"), interpret::step_rmse_csv(ev));
        rows.push_back({a.method, model_label(ck.config.model), setting, name, ev.rmse});
    }
    report::write_results(out / "results.csv", rows);
    print_table(rows);
}

// ---- forecast ---------------------------------------------------------

struct ForecastArgs {
    std::string checkpoint;
    std::string window;
    std::string output;
};

void run_forecast(const ForecastArgs& a) {
    const auto ck = load_checkpoint(a.checkpoint);
    const auto raw = data::load_wide_csv(a.window);
    const auto bundle = interpret::explain(ck, raw);
    const fs::path out(a.output);
    interpret::write_bundle(bundle, out);
    json cfg = hyperparameters_json(ck.config);
    cfg["command"] = "forecast";
    cfg["checkpoint"] = a.checkpoint;
    cfg["window_csv"] = a.window;
    cfg["output"] = a.output;
    write_json(out / "config.json", cfg);
    std::cout << "forecast from " << bundle.input_dates.back() << " (" << bundle.channels.front()
              << "), winning rule " << bundle.winner << ":\n";
    for (std::size_t k = 0; k < bundle.forecast.size(); ++k) {
        std::cout << "  +" << (k + 1) << "  " << fmt(bundle.forecast[k]) << "\n";
    }
}

// ---- baseline ---------------------------------------------------------

struct BaselineArgs {
    std::string method;
    std::string dataset;
    std::string split = "all";
    std::string output;
    std::string order = "4,1,1";
    std::size_t threads = 0;
    std::size_t hidden = 128;
    std::size_t layers = 2;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    bool quiet = false;
};

baselines::ArimaOrder parse_order(const std::string& text) {
    baselines::ArimaOrder o;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%zu,%zu,%zu%c", &o.p, &o.d, &o.q, &tail) != 3) {
        throw ConfigError("--order must look like p,d,q (for example 4,1,1)");
    }
    o.validate();
    return o;
}

void run_baseline(const BaselineArgs& a) {
    const auto ds = data::load_dataset(a.dataset);
    const fs::path out(a.output);
    fs::create_directories(out);
    const auto splits = parse_splits(a.split);
    const auto setting = report::setting_label(ds.window(), ds.horizon());
    json cfg = {{"command", "baseline"}, {"method", a.method}, {"dataset", a.dataset}, {"split", a.split},
                {"output", a.output}};

    std::string method;
    std::string label;
    std::function<std::vector<std::vector<double>>(const training::BatchData&)> forecaster;
    std::optional<baselines::LstmBaseline> lstm;

    if (a.method == "persistence") {
        method = "Persistence";
        forecaster = [&](const training::BatchData& b) {
            return baselines::persistence_batch(b, ds.cols(), ds.horizon());
        };
    } else if (a.method == "arima") {
        const auto order = parse_order(a.order);
        method = order.to_string();
        cfg["order"] = a.order;
        cfg["threads"] = a.threads;
        cfg["long_ar_order"] = baselines::long_ar_order(order);
        forecaster = [&, order](const training::BatchData& b) {
            return baselines::arima_batch(b, ds.cols(), ds.horizon(), order, a.threads);
        };
    } else if (a.method == "lstm") {
        baselines::LstmBaselineConfig lc{ds.cols(), ds.window(), ds.horizon(), a.hidden, a.layers};
        training::TrainOptions options;
        options.epochs = a.epochs;
        options.batch_size = a.batch_size;
        options.adam.learning_rate = a.learning_rate;
        options.seed = a.seed;
        method = "LSTM";
        label = "layers=" + std::to_string(a.layers) + ",D_h=" + std::to_string(a.hidden);
        cfg.update({{"hidden", a.hidden}, {"layers", a.layers}, {"epochs", a.epochs}, {"batch_size", a.batch_size},
                    {"learning_rate", a.learning_rate}, {"seed", a.seed}});
        write_json(out / "config.json", cfg);
        compute::Rng rng(a.seed);
        lstm = baselines::LstmBaseline::create(lc, rng);
        std::ofstream loss(out / "loss.csv");
        loss << interpret::loss_csv_header() << std::flush;
        const auto summary = baselines::train_lstm_baseline(*lstm, ds, options, [&](const training::EpochLog& log) {
            loss << interpret::loss_csv_row(log) << std::flush;
            if (!a.quiet) {
                std::cout << "epoch " << log.epoch << "/" << a.epochs << "  mse " << fmt(log.mse) << "  valid rmse "
                          << fmt(log.valid_rmse) << std::endl;
            }
        });
        cfg["best_epoch"] = summary.best_epoch;
        svg::write_file(out / "loss.svg", interpret::loss_svg(summary.history));
        forecaster = [&](const training::BatchData& b) { return baselines::predict(*lstm, b); };
    } else {
        throw ConfigError("--method must be persistence, arima or lstm");
    }
    write_json(out / "config.json", cfg);

    std::vector<report::ResultRow> rows;
    json skipped = json::object();
    for (auto split : splits) {
        const auto ev = training::evaluate_with(ds, split, forecaster);
        const std::string name = data::split_name(split);
        skipped[name] = ev.skipped;
        if (ev.skipped > 0) {
            std::cerr << "note: " << ev.skipped << " " << name << " windows could not be fitted and are left out\n";
        }
        if (ev.forecasts.empty()) {
            std::cerr << "note: no " << name << " forecasts; no RMSE reported\n";
            continue;
        }
        write_text(out / ("forecasts_" + name + ".csv"), interpret::forecasts_csv(ev));
        write_text(out / ("step_rmse_" + name + ".csv"), interpret::step_rmse_csv(ev));
        rows.push_back({method, label, setting, name, ev.rmse});
    }
    cfg["skipped"] = skipped;
    write_json(out / "config.json", cfg);
    report::write_results(out / "results.csv", rows);
    print_table(rows);
}

// ---- report -----------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> results;
    std::string output;
};

void run_report(const ReportArgs& a) {
    std::vector<report::ResultRow> rows;
    for (const auto& path : a.results) {
        auto part = report::read_results(path);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    const auto table = report::build_table(rows);
    std::cout << report::render_text(table);
    if (!a.output.empty()) {
        const fs::path out(a.output);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        write_text(out, report::render_csv(table));
        write_json(out.string() + ".config.json", {{"command", "report"}, {"results", a.results}, {"output", a.output}});
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fuzzformer: neuro-fuzzy multi-horizon forecasting"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic dataset (CSV files and manifest)");
    synth_cmd->add_option("-o,--output", synth.output, "Output directory")->required();
    synth_cmd->add_option("--rows", synth.options.rows, "Number of daily rows")->capture_default_str();
    synth_cmd->add_option("--seed", synth.options.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--period", synth.options.period, "Sinusoid period in rows")->capture_default_str();
    synth_cmd->add_option("--amplitude", synth.options.amplitude)->capture_default_str();
    synth_cmd->add_option("--trend", synth.options.trend, "Trend per row")->capture_default_str();
    synth_cmd->add_option("--ar1", synth.options.ar1)->capture_default_str();
    synth_cmd->add_option("--ar2", synth.options.ar2)->capture_default_str();
    synth_cmd->add_option("--noise", synth.options.noise, "Innovation standard deviation")->capture_default_str();
    synth_cmd->add_option("--start_date", synth.options.start_date)->capture_default_str();

    FetchArgs fetch;
    auto* fetch_cmd = app.add_subcommand("fetch", "Download a date,value CSV over HTTP(S) into the cache");
    fetch_cmd->add_option("--url", fetch.url)->required();
    fetch_cmd->add_option("-o,--output", fetch.output, "Where to write the CSV")->required();
    fetch_cmd->add_option("--cache_dir", fetch.cache_dir, "Defaults to $FUZZFORMER_CACHE_DIR");

    PrepareArgs prep;
    auto* prep_cmd = app.add_subcommand("prepare", "Align, scale and window series into a dataset file");
    auto* manifest_opt = prep_cmd->add_option("--manifest", prep.manifest, "JSON manifest of channels");
    auto* csv_opt = prep_cmd->add_option("--csv", prep.csv, "date,value CSV files or URLs; the first is the main series");
    manifest_opt->excludes(csv_opt);
    prep_cmd->add_option("--window", prep.window, "Look-back N")->capture_default_str();
    prep_cmd->add_option("--horizon", prep.horizon, "Horizon H")->capture_default_str();
    prep_cmd->add_option("--stride", prep.stride)->capture_default_str();
    prep_cmd->add_option("-o,--output", prep.output, "Output directory")->required();
    prep_cmd->add_option("--cache_dir", prep.cache_dir, "Defaults to $FUZZFORMER_CACHE_DIR");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a model; flags override the config file");
    train_cmd->add_option("-c,--config", train.config, "JSON run configuration");
    train_cmd->add_flag("-q,--quiet", train.quiet, "No per-epoch progress");
    for (const auto& key : run_config_keys()) {
        train_cmd->add_option_function<std::string>(
            (key == "output" ? "-o,--" : "--") + key, [&train, key](const std::string& v) { train.overrides[key] = v; },
            "Overrides '" + key + "'");
    }

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "RMSE of a checkpoint on a dataset split");
    eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
    eval_cmd->add_option("--dataset", eval.dataset)->required();
    eval_cmd->add_option("--split", eval.split, "train, valid, test or all")->capture_default_str();
    eval_cmd->add_option("-o,--output", eval.output, "Output directory")->required();
    eval_cmd->add_option("--method", eval.method, "Row label in results.csv")->capture_default_str();

    ForecastArgs fc;
    auto* fc_cmd = app.add_subcommand("forecast", "Forecast from a window CSV and export interpretability data");
    fc_cmd->add_option("--checkpoint", fc.checkpoint)->required();
    fc_cmd->add_option("--window", fc.window, "Wide CSV: date,<channel>,... with at least N rows")->required();
    fc_cmd->add_option("-o,--output", fc.output, "Output directory")->required();

    BaselineArgs base;
    auto* base_cmd = app.add_subcommand("baseline", "Persistence, ARIMA or LSTM baseline on a dataset");
    base_cmd->add_option("--method", base.method, "persistence, arima or lstm")->required();
    base_cmd->add_option("--dataset", base.dataset)->required();
    base_cmd->add_option("--split", base.split, "train, valid, test or all")->capture_default_str();
    base_cmd->add_option("-o,--output", base.output, "Output directory")->required();
    base_cmd->add_option("--order", base.order, "ARIMA p,d,q")->capture_default_str();
    base_cmd->add_option("--threads", base.threads, "ARIMA workers (0 = all cores)")->capture_default_str();
    base_cmd->add_option("--hidden", base.hidden, "LSTM width")->capture_default_str();
    base_cmd->add_option("--layers", base.layers, "LSTM layers")->capture_default_str();
    base_cmd->add_option("--epochs", base.epochs)->capture_default_str();
    base_cmd->add_option("--batch_size", base.batch_size)->capture_default_str();
    base_cmd->add_option("--learning_rate", base.learning_rate)->capture_default_str();
    base_cmd->add_option("--seed", base.seed)->capture_default_str();
    base_cmd->add_flag("-q,--quiet", base.quiet, "No per-epoch progress");

    ReportArgs rep;
    auto* rep_cmd = app.add_subcommand("report", "Combine results CSVs into a comparison table");
    rep_cmd->add_option("results,--results", rep.results, "results.csv files")->required();
    rep_cmd->add_option("-o,--output", rep.output, "Also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (synth_cmd->parsed()) run_synth(synth);
        if (fetch_cmd->parsed()) run_fetch(fetch);
        if (prep_cmd->parsed()) run_prepare(prep);
        if (train_cmd->parsed()) run_train(train);
        if (eval_cmd->parsed()) run_evaluate(eval);
        if (fc_cmd->parsed()) run_forecast(fc);
        if (base_cmd->parsed()) run_baseline(base);
        if (rep_cmd->parsed()) run_report(rep);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NonFiniteError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const PositiveDefiniteError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const FitError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    }
    return kOk;
}
