#include "fuzzformer/config.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "fuzzformer/error.hpp"

namespace fuzzformer {

namespace {

using nlohmann::json;

template <class Config, class F>
void visit_fields(Config& c, F&& f) {
    auto& e = c.model.encoder;
    f("window", e.window);
    f("horizon", e.horizon);
    f("input_dim", e.input_dim);
    f("hidden", e.hidden);
    f("lstm_layers", e.lstm_layers);
    f("attention_layers", e.attention_layers);
    f("heads", e.heads);
    f("latent_dim", e.latent_dim);
    f("dropout", e.dropout);
    f("residual", e.residual);
    f("rules", c.model.rules);
    f("ar_order", c.model.ar_order);
    f("exo_order", c.model.exo_order);
    f("integration", c.model.integration);
    f("covariance_epsilon", c.model.covariance_epsilon);
    f("initial_spread", c.model.initial_spread);
    f("mse_weight", c.train.weights.mse);
    f("fcm_weight", c.train.weights.fcm);
    f("overlap_weight", c.train.weights.overlap);
    f("balance_weight", c.train.weights.balance);
    f("learning_rate", c.train.adam.learning_rate);
    f("beta1", c.train.adam.beta1);
    f("beta2", c.train.adam.beta2);
    f("adam_epsilon", c.train.adam.epsilon);
    f("batch_size", c.train.batch_size);
    f("epochs", c.train.epochs);
    f("seed", c.train.seed);
    f("dataset", c.dataset);
    f("output", c.output);
}

template <class T>
void read_value(const json& j, const std::string& key, T& out) {
    const auto bad = [&](const char* expected) {
        return ConfigError("config: '" + key + "' must be " + expected + ", got " + j.dump());
    };
    if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw bad("true or false");
        out = j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) throw bad("a string");
        out = j.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!j.is_number()) throw bad("a number");
        out = j.get<double>();
    } else if constexpr (std::is_unsigned_v<T>) {
        if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
            throw bad("a nonnegative integer");
        }
        out = j.get<T>();
    } else {
        if (!j.is_number_integer()) throw bad("an integer");
        out = j.get<T>();
    }
}

}  // namespace

RunConfig::RunConfig() {
    model.encoder.window = 0;
    model.encoder.horizon = 0;
    model.encoder.input_dim = 0;
}

void RunConfig::resolve(const data::WindowedDataset& ds) {
    auto fill = [](std::size_t& field, std::size_t actual, const char* name) {
        if (field == 0) {
            field = actual;
        } else if (field != actual) {
            throw ConfigError(std::string("config: ") + name + " = " + std::to_string(field) +
                              " but the dataset has " + std::to_string(actual));
        }
    };
    fill(model.encoder.window, ds.window(), "window");
    fill(model.encoder.horizon, ds.horizon(), "horizon");
    fill(model.encoder.input_dim, ds.cols(), "input_dim");
}

void RunConfig::validate() const {
    model.validate();
    train.weights.validate();
    if (train.batch_size == 0) throw ConfigError("config: batch_size must be at least 1");
    const auto& a = train.adam;
    if (!(a.learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0)) {
        throw ConfigError("config: beta1 and beta2 must lie in [0, 1)");
    }
    if (!(a.epsilon > 0.0)) throw ConfigError("config: adam_epsilon must be positive");
    if (!(model.initial_spread > 0.0)) throw ConfigError("config: initial_spread must be positive");
}

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        RunConfig c;
        visit_fields(c, [&](const char* name, auto&) { k.emplace_back(name); });
        return k;
    }();
    return keys;
}

json to_json(const RunConfig& config) {
    json j = json::object();
    RunConfig copy = config;
    visit_fields(copy, [&](const char* name, auto& value) { j[name] = value; });
    return j;
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    const auto& keys = run_config_keys();
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("config: unknown field '" + key + "'");
    }
    visit_fields(base, [&](const char* name, auto& value) {
        if (j.contains(name)) read_value(j.at(name), name, value);
    });
    return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << to_json(config).dump(2) << '\n';
    if (!out) throw DataError("config: cannot write " + path.string());
}

json hyperparameters_json(const RunConfig& config) {
    json j = to_json(config);
    j.erase("dataset");
    j.erase("output");
    return j;
}

}  // namespace fuzzformer
