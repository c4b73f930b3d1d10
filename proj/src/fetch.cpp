#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "fuzzformer/fetch.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "httplib.h"

#include "fuzzformer/error.hpp"

namespace fuzzformer::data {

namespace fs = std::filesystem;

namespace {

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw FetchError("sha256 digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
    std::string stem;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw FetchError("fetch: not an absolute URL: " + url);
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw FetchError("fetch: unsupported scheme '" + scheme + "'");
    const auto path_begin = url.find('/', scheme_end + 3);
    ParsedUrl p;
    p.origin = url.substr(0, path_begin);
    p.path = path_begin == std::string::npos ? "/" : url.substr(path_begin);
    std::string segment = p.path.substr(0, p.path.find_first_of("?#"));
    segment = segment.substr(segment.find_last_of('/') + 1);
    p.stem = fs::path(segment).stem().string();
    if (p.stem.empty()) p.stem = "series";
    return p;
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

fs::path cache_path(const std::string& url, const fs::path& cache_dir) {
    return cache_dir / (sha256_hex(url) + ".csv");
}

RawSeries fetch_http(const std::string& url, const fs::path& cache_dir) {
    const ParsedUrl parsed = parse_url(url);
    const fs::path cached = cache_path(url, cache_dir);
    if (fs::exists(cached)) return parse_csv(read_all(cached), parsed.stem);

    httplib::Client client(parsed.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    client.set_follow_location(true);
    auto response = client.Get(parsed.path);
    if (!response) {
        throw FetchError("fetch " + url + ": " + httplib::to_string(response.error()) +
                         "; download the file manually and pass it as a local CSV");
    }
    if (response->status != 200) {
        throw FetchError("fetch " + url + ": HTTP status " + std::to_string(response->status));
    }
    RawSeries series = parse_csv(response->body, parsed.stem);  // schema check before caching
    fs::create_directories(cache_dir);
    const fs::path partial = cached.string() + ".part";
    {
        std::ofstream out(partial, std::ios::binary);
        out << response->body;
        if (!out) throw FetchError("fetch: cannot write cache file " + partial.string());
    }
    fs::rename(partial, cached);
    return series;
}

bool is_url(const std::string& source) {
    return source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0;
}

RawSeries clip_dates(const RawSeries& series, const std::string& first, const std::string& last) {
    RawSeries out{series.name, {}};
    for (const auto& obs : series.observations) {
        if (!first.empty() && obs.date < first) continue;
        if (!last.empty() && obs.date > last) continue;
        out.observations.push_back(obs);
    }
    return out;
}

std::vector<RawSeries> load_sources(const Manifest& manifest, const fs::path& cache_dir) {
    std::vector<RawSeries> out;
    for (const auto& entry : manifest.channels) {
        RawSeries s = is_url(entry.source) ? fetch_http(entry.source, cache_dir) : load_csv(entry.source);
        s.name = entry.name;
        s = clip_dates(s, entry.first_date, entry.last_date);
        if (s.observations.empty()) throw DataError(entry.name + ": no observations inside the requested date range");
        out.push_back(std::move(s));
    }
    return out;
}

fs::path default_cache_dir() {
    if (const char* dir = std::getenv("FUZZFORMER_CACHE_DIR"); dir && *dir) return dir;
    if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "fuzzformer";
    return ".fuzzformer-cache";
}

}  // namespace fuzzformer::data
