#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fuzzformer/data.hpp"

namespace fuzzformer::data {

/// Cache file used for `url` inside `cache_dir` (named by the URL's SHA-256).
std::filesystem::path cache_path(const std::string& url, const std::filesystem::path& cache_dir);

/// Downloads a `date,value` CSV, validates it like load_csv and caches the raw
/// bytes. A cached URL is served from disk without touching the network.
/// The series is named after the URL's final path segment.
RawSeries fetch_http(const std::string& url, const std::filesystem::path& cache_dir);

/// True for http:// and https:// sources.
bool is_url(const std::string& source);

/// Observations with first <= date <= last; an empty bound is open.
RawSeries clip_dates(const RawSeries& series, const std::string& first, const std::string& last);

/// Loads every manifest channel in order (URLs through the cache, paths from
/// disk), names it after its entry and clips it to the entry's date range.
std::vector<RawSeries> load_sources(const Manifest& manifest, const std::filesystem::path& cache_dir);

/// $FUZZFORMER_CACHE_DIR, else $HOME/.cache/fuzzformer, else ./.fuzzformer-cache.
std::filesystem::path default_cache_dir();

}  // namespace fuzzformer::data
