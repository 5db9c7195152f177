#include "facetsim/archive.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <memory>
#include <set>
#include <system_error>

#include "facetsim/scenario.hpp"
#include "facetsim/workspace.hpp"

namespace fs = std::filesystem;

namespace facetsim {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("HASH_FAILURE", "SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

namespace {

std::string safe_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "run" : out;
}

}  // namespace

RunArchive persist_run(const RunResult& result, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("STORAGE_FAILURE", "cannot create " + out_dir.string() + ": " + ec.message());

  RunArchive archive;
  archive.scenario = result.snapshot.name;
  archive.seed = result.seed;
  archive.engine_version = std::string(kEngineVersion);
  const std::string prefix = safe_name(result.snapshot.name) + "-seed" + std::to_string(result.seed) + "-";
  // create_directory fails on an existing directory, so concurrent persists
  // never share a run id.
  for (int n = 1;; ++n) {
    fs::path candidate = out_dir / (prefix + std::to_string(n));
    if (fs::create_directory(candidate, ec)) {
      archive.dir = candidate;
      archive.run_id = prefix + std::to_string(n);
      break;
    }
    if (ec) throw Error("STORAGE_FAILURE", "cannot create " + candidate.string() + ": " + ec.message());
  }

  std::map<std::string, std::string> files = result.snapshot.files;
  files["scenario.json"] = result.snapshot.document;
  files["metrics.csv"] = result.csv();
  files["warnings.log"] = result.warnings_log();

  Workspace ws(archive.dir);
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& [path, bytes] : files) {
    ws.write(path, bytes);
    archive.hashes[path] = sha256_hex(bytes);
    hashes[path] = archive.hashes[path];
  }
  nlohmann::json meta = {{"run_id", archive.run_id},
                         {"scenario", archive.scenario},
                         {"seed", archive.seed},
                         {"engine_version", archive.engine_version},
                         {"files", hashes}};
  ws.write("meta.json", meta.dump(2) + "\n");
  return archive;
}

RunArchive open_archive(const fs::path& dir) {
  auto bad = [&](const std::string& why) { return Error("BAD_ARCHIVE", dir.string() + ": " + why, dir.string()); };
  if (!fs::is_regular_file(dir / "meta.json")) throw bad("no meta.json; not a run archive");
  nlohmann::json meta = nlohmann::json::parse(read_file(dir / "meta.json"), nullptr, false);
  if (!meta.is_object() || !meta.contains("files") || !meta["files"].is_object()) throw bad("meta.json is not valid");
  RunArchive archive;
  archive.dir = dir;
  try {
    archive.run_id = meta.at("run_id").get<std::string>();
    archive.scenario = meta.at("scenario").get<std::string>();
    archive.seed = meta.at("seed").get<std::uint64_t>();
    archive.engine_version = meta.at("engine_version").get<std::string>();
    for (const auto& [path, hash] : meta.at("files").items()) archive.hashes[path] = hash.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("meta.json: ") + e.what());
  }
  for (const char* required : {"scenario.json", "metrics.csv", "warnings.log"}) {
    if (!archive.hashes.count(required)) throw bad(std::string("meta.json does not list ") + required);
  }
  Workspace ws(dir);
  for (const auto& [path, hash] : archive.hashes) {
    if (sha256_hex(ws.read(path)) != hash) {
      throw Error("HASH_MISMATCH", "archived file '" + path + "' does not match its recorded hash", path);
    }
  }
  return archive;
}

RunResult rerun_archive(const RunArchive& archive) {
  Workspace ws(archive.dir);
  LoadedScenario loaded = load_scenario(ws.read("scenario.json"), ws);
  return run_scenario(loaded, archive.seed);
}

MetricTable read_archive_metrics(const RunArchive& archive) {
  return parse_metrics_csv(read_file(archive.dir / "metrics.csv"));
}

Comparison compare_runs(const std::vector<RunSeries>& runs) {
  if (runs.size() < 2) throw Error("NEED_TWO_RUNS", "comparison needs at least two runs");
  Comparison c;
  for (const auto& name : runs.front().table.names) {
    bool everywhere = std::all_of(runs.begin() + 1, runs.end(), [&](const RunSeries& r) {
      return std::find(r.table.names.begin(), r.table.names.end(), name) != r.table.names.end();
    });
    if (everywhere) c.metrics.push_back(name);
  }
  if (c.metrics.empty()) throw Error("NO_SHARED_METRICS", "the runs have no metric name in common");

  std::set<std::int64_t> ticks;
  for (const auto& r : runs) {
    c.runs.push_back(r.run_id);
    for (const auto& row : r.table.rows) ticks.insert(row.tick);
  }
  c.ticks.assign(ticks.begin(), ticks.end());
  c.cells.assign(c.ticks.size(), std::vector<std::optional<double>>(c.metrics.size() * runs.size()));

  for (std::size_t ri = 0; ri < runs.size(); ++ri) {
    const MetricTable& t = runs[ri].table;
    for (std::size_t mi = 0; mi < c.metrics.size(); ++mi) {
      const std::size_t col = static_cast<std::size_t>(
          std::find(t.names.begin(), t.names.end(), c.metrics[mi]) - t.names.begin());
      MetricSummary s{c.metrics[mi], runs[ri].run_id, std::nullopt, std::nullopt};
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& row : t.rows) {
        const auto& v = row.values[col];
        const std::size_t ti = static_cast<std::size_t>(
            std::lower_bound(c.ticks.begin(), c.ticks.end(), row.tick) - c.ticks.begin());
        c.cells[ti][mi * runs.size() + ri] = v;
        if (v) {
          sum += *v;
          ++n;
        }
      }
      if (!t.rows.empty()) s.final_value = t.rows.back().values[col];
      if (n > 0) s.mean = sum / static_cast<double>(n);
      c.summary.push_back(std::move(s));
    }
  }
  // Summary ordered metric-major like the table.
  std::stable_sort(c.summary.begin(), c.summary.end(), [&](const MetricSummary& a, const MetricSummary& b) {
    auto pos = [&](const std::string& m) { return std::find(c.metrics.begin(), c.metrics.end(), m); };
    return pos(a.metric) < pos(b.metric);
  });
  return c;
}

Comparison compare_archives(const std::vector<RunArchive>& archives) {
  std::vector<RunSeries> runs;
  for (const auto& a : archives) runs.push_back({a.run_id, read_archive_metrics(a)});
  return compare_runs(runs);
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

nlohmann::json json_cell(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

std::string comparison_csv(const Comparison& c) {
  std::string out = "tick";
  for (const auto& m : c.metrics) {
    for (const auto& r : c.runs) out += "," + m + "@" + r;
  }
  out += "\n";
  for (std::size_t t = 0; t < c.ticks.size(); ++t) {
    out += std::to_string(c.ticks[t]);
    for (const auto& v : c.cells[t]) out += "," + cell(v);
    out += "\n";
  }
  out += "\nmetric,run,final,mean\n";
  for (const auto& s : c.summary) {
    out += s.metric + "," + s.run_id + "," + cell(s.final_value) + "," + cell(s.mean) + "\n";
  }
  return out;
}

nlohmann::json comparison_json(const Comparison& c) {
  nlohmann::json series = nlohmann::json::object();
  for (std::size_t mi = 0; mi < c.metrics.size(); ++mi) {
    nlohmann::json per_run = nlohmann::json::object();
    for (std::size_t ri = 0; ri < c.runs.size(); ++ri) {
      nlohmann::json values = nlohmann::json::array();
      for (const auto& row : c.cells) values.push_back(json_cell(row[mi * c.runs.size() + ri]));
      per_run[c.runs[ri]] = std::move(values);
    }
    series[c.metrics[mi]] = std::move(per_run);
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : c.summary) {
    summary.push_back(
        {{"metric", s.metric}, {"run", s.run_id}, {"final", json_cell(s.final_value)}, {"mean", json_cell(s.mean)}});
  }
  return {{"metrics", c.metrics}, {"runs", c.runs}, {"ticks", c.ticks}, {"series", series}, {"summary", summary}};
}

nlohmann::json metric_series_json(const std::vector<std::string>& names, const std::vector<MetricRow>& rows) {
  nlohmann::json out = nlohmann::json::object();
  nlohmann::json ticks = nlohmann::json::array();
  for (const auto& r : rows) ticks.push_back(r.tick);
  out["tick"] = std::move(ticks);
  for (std::size_t i = 0; i < names.size(); ++i) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& r : rows) values.push_back(json_cell(r.values[i]));
    out[names[i]] = std::move(values);
  }
  return out;
}

}  // namespace facetsim
