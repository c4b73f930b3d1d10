#include "fuzzformer/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "fuzzformer/error.hpp"

namespace fuzzformer {

namespace {

constexpr const char* kMagic = "FUZZFORMER-CHECKPOINT 1";

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw DataError("checkpoint: bad number '" + s + "'");
    return v;
}

void check_name(const std::string& name) {
    if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos) {
        throw DataError("checkpoint: name '" + name + "' is empty or contains whitespace");
    }
}

void put_le(std::string& out, double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double get_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

}  // namespace

Checkpoint make_checkpoint(const RunConfig& config, const data::WindowedDataset& dataset,
                           const FuzzformerModel& model, const training::TrainSummary& summary) {
    Checkpoint c;
    c.config = config;
    c.config.dataset.clear();
    c.config.output.clear();
    c.channels = dataset.channels;
    c.scaler = dataset.scaler;
    c.best_epoch = summary.best_epoch;
    c.best_valid_rmse = summary.best_valid_rmse;
    c.model = model;  // shares the parameter tensors
    return c;
}

std::string encode_checkpoint(const Checkpoint& c) {
    if (c.scaler.min.size() != c.channels.size() || c.scaler.max.size() != c.channels.size()) {
        throw DataError("checkpoint: scaler does not match the channel list");
    }
    const std::string config = hyperparameters_json(c.config).dump();
    std::string out = std::string(kMagic) + "\n";
    out += "config " + std::to_string(config.size()) + "\n" + config + "\n";
    out += "best_epoch " + std::to_string(c.best_epoch) + " best_valid_rmse " + format_double(c.best_valid_rmse) + "\n";
    out += "channels " + std::to_string(c.channels.size()) + "\n";
    for (std::size_t i = 0; i < c.channels.size(); ++i) {
        check_name(c.channels[i]);
        out += c.channels[i] + " " + format_double(c.scaler.min[i]) + " " + format_double(c.scaler.max[i]) + "\n";
    }
    const auto params = c.model.named_parameters();
    std::size_t total = 0;
    out += "tensors " + std::to_string(params.size()) + "\n";
    for (const auto& [name, tensor] : params) {
        check_name(name);
        out += name + " " + std::to_string(tensor->shape().size());
        for (auto d : tensor->shape()) out += " " + std::to_string(d);
        out += "\n";
        total += tensor->size();
    }
    out += "payload " + std::to_string(total) + "\n";
    out.reserve(out.size() + 8 * total);
    for (const auto& [name, tensor] : params) {
        for (double v : tensor->value()) put_le(out, v);
    }
    return out;
}

static Checkpoint decode_impl(const std::string& bytes) {
    std::size_t pos = 0;
    auto line = [&]() {
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string::npos) throw DataError("checkpoint: truncated header");
        std::string s = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return s;
    };
    auto fields = [&](const std::string& s) {
        std::istringstream in(s);
        return std::vector<std::string>(std::istream_iterator<std::string>(in), {});
    };
    auto count_after = [&](const std::string& s, const char* key) {
        auto f = fields(s);
        if (f.size() != 2 || f[0] != key) throw DataError(std::string("checkpoint: expected '") + key + " <count>'");
        return static_cast<std::size_t>(std::stoull(f[1]));
    };

    if (line() != kMagic) throw DataError("checkpoint: bad or unsupported version tag");
    const std::size_t config_len = count_after(line(), "config");
    if (pos + config_len + 1 > bytes.size()) throw DataError("checkpoint: truncated config");
    const std::string config_text = bytes.substr(pos, config_len);
    pos += config_len;
    if (bytes[pos++] != '\n') throw DataError("checkpoint: config length mismatch");

    Checkpoint c;
    try {
        c.config = run_config_from_json(nlohmann::json::parse(config_text));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: config is not valid JSON: ") + e.what());
    }
    c.config.validate();

    auto best = fields(line());
    if (best.size() != 4 || best[0] != "best_epoch" || best[2] != "best_valid_rmse") {
        throw DataError("checkpoint: expected best_epoch/best_valid_rmse line");
    }
    c.best_epoch = static_cast<std::size_t>(std::stoull(best[1]));
    c.best_valid_rmse = parse_double(best[3]);

    const std::size_t channels = count_after(line(), "channels");
    for (std::size_t i = 0; i < channels; ++i) {
        auto f = fields(line());
        if (f.size() != 3) throw DataError("checkpoint: bad channel line");
        c.channels.push_back(f[0]);
        c.scaler.min.push_back(parse_double(f[1]));
        c.scaler.max.push_back(parse_double(f[2]));
    }
    if (channels != c.config.model.encoder.input_dim) {
        throw DataError("checkpoint: channel count does not match input_dim");
    }

    compute::Rng rng(0);
    c.model = FuzzformerModel::create(c.config.model, rng);
    std::map<std::string, compute::Tensor> expected;
    for (auto& [name, tensor] : c.model.named_parameters()) expected.emplace(name, tensor);

    const std::size_t tensors = count_after(line(), "tensors");
    if (tensors != expected.size()) throw DataError("checkpoint: tensor count does not match the configuration");
    std::vector<compute::Tensor> order;
    std::size_t total = 0;
    for (std::size_t i = 0; i < tensors; ++i) {
        auto f = fields(line());
        if (f.size() < 2) throw DataError("checkpoint: bad tensor line");
        auto it = expected.find(f[0]);
        if (it == expected.end()) throw DataError("checkpoint: unexpected tensor '" + f[0] + "'");
        compute::Shape shape;
        const auto rank = static_cast<std::size_t>(std::stoull(f[1]));
        if (f.size() != rank + 2) throw DataError("checkpoint: bad shape for '" + f[0] + "'");
        for (std::size_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(std::stoull(f[2 + d])));
        if (shape != it->second->shape()) {
            throw DataError("checkpoint: tensor '" + f[0] + "' has shape " + compute::to_string(shape) +
                            ", configuration expects " + compute::to_string(it->second->shape()));
        }
        order.push_back(it->second);
        expected.erase(it);
        total += order.back()->size();
    }
    if (count_after(line(), "payload") != total) throw DataError("checkpoint: payload size mismatch");
    if (bytes.size() - pos != 8 * total) throw DataError("checkpoint: payload has the wrong length");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (auto& t : order) {
        auto v = t->mutable_value();
        for (double& x : v) {
            x = get_le(p);
            p += 8;
        }
    }
    return c;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    try {
        return decode_impl(bytes);
    } catch (const std::logic_error&) {
        throw DataError("checkpoint: malformed count or dimension in header");
    }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const std::string bytes = encode_checkpoint(checkpoint);
    const auto tmp = path.string() + ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("checkpoint: cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

void check_compatible(const Checkpoint& c, const data::WindowedDataset& ds) {
    const auto& e = c.config.model.encoder;
    if (e.window != ds.window() || e.horizon != ds.horizon()) {
        throw ConfigError("checkpoint was trained with N=" + std::to_string(e.window) + ", H=" +
                          std::to_string(e.horizon) + " but the dataset has N=" + std::to_string(ds.window()) +
                          ", H=" + std::to_string(ds.horizon()));
    }
    if (c.channels != ds.channels) throw ConfigError("checkpoint channels do not match the dataset's channels");
}

}  // namespace fuzzformer
