#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "facetsim/metrics.hpp"
#include "facetsim/sim.hpp"

namespace facetsim {

inline constexpr std::string_view kEngineVersion = "0.1.0";

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// A persisted run: <dir>/scenario.json, facets/, flows/, policies/,
/// metrics.csv, warnings.log and meta.json (run id, seed, engine version,
/// per-file hashes).
struct RunArchive {
  std::filesystem::path dir;
  std::string run_id;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string engine_version;
  std::map<std::string, std::string> hashes;  // relative path -> sha256
};

/// Writes the result under `out_dir` into a fresh directory named
/// `<scenario>-seed<seed>-<n>`, n the smallest free number.
/// Errors: STORAGE_FAILURE.
RunArchive persist_run(const RunResult& result, const std::filesystem::path& out_dir);

/// Reads meta.json and verifies every hash. Errors: BAD_ARCHIVE,
/// MISSING_FILE, HASH_MISMATCH (location = the tampered file).
RunArchive open_archive(const std::filesystem::path& dir);

/// Re-runs the archived snapshot with the archived seed.
RunResult rerun_archive(const RunArchive& archive);

MetricTable read_archive_metrics(const RunArchive& archive);

struct RunSeries {
  std::string run_id;
  MetricTable table;
};

struct MetricSummary {
  std::string metric;
  std::string run_id;
  std::optional<double> final_value;  // last collected row
  std::optional<double> mean;         // over non-empty collected cells
};

/// Ticks are the union over runs; columns are metric-major, run-minor.
struct Comparison {
  std::vector<std::string> metrics;
  std::vector<std::string> runs;
  std::vector<std::int64_t> ticks;
  std::vector<std::vector<std::optional<double>>> cells;  // [tick][metric * runs + run]
  std::vector<MetricSummary> summary;
};

/// Needs two or more runs (NEED_TWO_RUNS) sharing a metric name
/// (NO_SHARED_METRICS).
Comparison compare_runs(const std::vector<RunSeries>& runs);
Comparison compare_archives(const std::vector<RunArchive>& archives);

/// Table (`tick,<metric>@<run>...`), a blank line, then
/// `metric,run,final,mean` rows.
std::string comparison_csv(const Comparison& c);
nlohmann::json comparison_json(const Comparison& c);

/// {"tick":[...], "<metric>":[...]} with null for empty cells.
nlohmann::json metric_series_json(const std::vector<std::string>& names, const std::vector<MetricRow>& rows);

}  // namespace facetsim
