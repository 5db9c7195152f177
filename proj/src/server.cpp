#include "facetsim/server.hpp"

#include <httplib.h>

#include <atomic>
#include <map>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>
#include <vector>

#include "facetsim/archive.hpp"
#include "facetsim/policy.hpp"
#include "facetsim/scenario.hpp"
#include "facetsim/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace facetsim {

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "unknown";
}

namespace {

constexpr const char* kJson = "application/json";

struct Job {
  std::string id;
  std::string scenario;
  JobState state = JobState::Queued;
  std::int64_t ticks_done = 0;
  std::int64_t ticks_total = 0;
  std::optional<RunArchive> archive;
  std::vector<std::string> metric_names;
  std::vector<MetricRow> rows;
  json error;
};

bool safe_name(const std::string& name) {
  static const std::regex re("[A-Za-z0-9_.-]+");
  return std::regex_match(name, re) && name != "." && name != "..";
}

std::string quoted(const std::string& hash) { return "\"" + hash + "\""; }

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2), kJson);
}

void send_report(httplib::Response& res, const ValidationReport& report) { send_json(res, 400, to_json(report)); }

void send_problem(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  ValidationReport r;
  r.error(code, "", message);
  send_json(res, status, to_json(r));
}

}  // namespace

struct ApiServer::Impl {
  Workspace ws;
  fs::path runs_dir;
  httplib::Server http;
  std::mutex write_mutex;  // serializes artifact writes
  std::mutex jobs_mutex;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::vector<std::thread> threads;
  std::atomic<std::uint64_t> next_job{1};

  Impl(fs::path root, std::optional<fs::path> runs) : ws(std::move(root)) {
    runs_dir = runs ? *runs : ws.root() / "runs";
    routes();
  }

  // If-Match check against the current bytes; absent header always passes.
  bool precondition_ok(const httplib::Request& req, const std::optional<std::string>& current) {
    if (!req.has_header("If-Match")) return true;
    const std::string want = req.get_header_value("If-Match");
    if (want == "*") return current.has_value();
    return current && quoted(sha256_hex(*current)) == want;
  }

  std::optional<std::string> try_read(const std::string& rel) {
    if (!ws.exists(rel)) return std::nullopt;
    return ws.read(rel);
  }

  void routes() {
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const ValidationFailed& e) {
        send_report(res, e.report());
      } catch (const Error& e) {
        ValidationReport r;
        r.errors.push_back(e.diagnostic());
        send_json(res, 400, to_json(r));
      } catch (const std::exception& e) {
        send_problem(res, 500, "INTERNAL", e.what());
      }
    });

    http.Get("/facets", [this](const httplib::Request&, httplib::Response& res) {
      Workspace::FacetCatalog catalog = ws.facets();
      json facets = json::array();
      for (const auto& [name, m] : catalog.manifests) facets.push_back(manifest_to_json(m));
      send_json(res, 200, {{"facets", facets}, {"report", to_json(catalog.report)}});
    });

    http.Get(R"(/flows/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string type = req.matches[1];
      if (!safe_name(type)) return send_problem(res, 404, "NOT_FOUND", "no flow for '" + type + "'");
      auto bytes = try_read("flows/" + type + ".graphml");
      if (!bytes) return send_problem(res, 404, "NOT_FOUND", "no flow for '" + type + "'");
      res.set_header("ETag", quoted(sha256_hex(*bytes)));
      res.set_content(*bytes, "application/xml");
    });

    http.Put(R"(/flows/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string type = req.matches[1];
      if (!safe_name(type)) return send_problem(res, 400, "BAD_NAME", "invalid agent type name");
      ValidationReport report = validate_flow_document(req.body, ws, type);
      if (!report.ok()) return send_report(res, report);
      const std::string rel = "flows/" + type + ".graphml";
      std::lock_guard lock(write_mutex);
      auto current = try_read(rel);
      if (!precondition_ok(req, current)) {
        return send_problem(res, 409, "CONFLICT", "flow changed since it was read (If-Match mismatch)");
      }
      ws.write(rel, req.body);
      res.set_header("ETag", quoted(sha256_hex(req.body)));
      send_json(res, current ? 200 : 201, to_json(report));
    });

    http.Get("/policies", [this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& rel : ws.list("policies", ".json")) {
        try {
          out.push_back(policy_to_json(parse_policy(std::string_view(ws.read(rel)))));
        } catch (const Error&) {
          // Broken files are reported by validation, not listed.
        }
      }
      send_json(res, 200, out);
    });

    http.Post("/policies", [this](const httplib::Request& req, httplib::Response& res) {
      ValidationReport report = validate_policy_document(req.body, ws);
      if (!report.ok()) return send_report(res, report);
      Policy p = parse_policy(std::string_view(req.body));
      if (!safe_name(p.name)) return send_problem(res, 400, "BAD_NAME", "policy names must match [A-Za-z0-9_.-]+");
      const std::string rel = "policies/" + p.name + ".json";
      std::lock_guard lock(write_mutex);
      if (ws.exists(rel)) return send_problem(res, 409, "CONFLICT", "policy '" + p.name + "' already exists");
      json stored = policy_to_json(p);
      ws.write(rel, stored.dump(2) + "\n");
      send_json(res, 201, stored);
    });

    http.Put(R"(/policies/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string name = req.matches[1];
      const std::string rel = "policies/" + name + ".json";
      if (!safe_name(name) || !ws.exists(rel)) return send_problem(res, 404, "NOT_FOUND", "no policy '" + name + "'");
      ValidationReport report = validate_policy_document(req.body, ws);
      if (!report.ok()) return send_report(res, report);
      Policy p = parse_policy(std::string_view(req.body));
      if (p.name != name) {
        ValidationReport r;
        r.error("NAME_MISMATCH", "name", "body names policy '" + p.name + "' but the path says '" + name + "'");
        return send_report(res, r);
      }
      std::lock_guard lock(write_mutex);
      if (!precondition_ok(req, try_read(rel))) {
        return send_problem(res, 409, "CONFLICT", "policy changed since it was read (If-Match mismatch)");
      }
      json stored = policy_to_json(p);
      ws.write(rel, stored.dump(2) + "\n");
      send_json(res, 200, stored);
    });

    http.Delete(R"(/policies/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string name = req.matches[1];
      const std::string rel = "policies/" + name + ".json";
      std::lock_guard lock(write_mutex);
      if (!safe_name(name) || !ws.exists(rel)) return send_problem(res, 404, "NOT_FOUND", "no policy '" + name + "'");
      if (!precondition_ok(req, try_read(rel))) {
        return send_problem(res, 409, "CONFLICT", "policy changed since it was read (If-Match mismatch)");
      }
      ws.remove(rel);
      res.status = 204;
    });

    http.Get("/scenarios", [this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& rel : ws.list("scenarios", ".json")) {
        json doc = json::parse(ws.read(rel), nullptr, false);
        out.push_back({{"id", fs::path(rel).stem().string()}, {"path", rel}, {"document", doc}});
      }
      send_json(res, 200, out);
    });

    http.Post("/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
      ValidationReport report = validate_scenario_document(req.body, ws);
      if (!report.ok()) return send_report(res, report);
      ScenarioDoc doc = parse_scenario(req.body);
      if (!safe_name(doc.name)) return send_problem(res, 400, "BAD_NAME", "scenario names must match [A-Za-z0-9_.-]+");
      const std::string rel = "scenarios/" + doc.name + ".json";
      std::lock_guard lock(write_mutex);
      if (ws.exists(rel)) return send_problem(res, 409, "CONFLICT", "scenario '" + doc.name + "' already exists");
      ws.write(rel, req.body);
      send_json(res, 201, {{"id", doc.name}, {"path", rel}, {"report", to_json(report)}});
    });

    http.Post("/runs", [this](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body, nullptr, false);
      if (!body.is_object() || !body.contains("scenario") || !body["scenario"].is_string()) {
        return send_problem(res, 400, "SCHEMA_VIOLATION", "expected {\"scenario\": \"<id>\", \"seed\"?: n}");
      }
      std::optional<std::uint64_t> seed;
      if (body.contains("seed")) {
        if (!body["seed"].is_number_unsigned()) {
          return send_problem(res, 400, "SCHEMA_VIOLATION", "seed must be a non-negative integer");
        }
        seed = body["seed"].get<std::uint64_t>();
      }
      const std::string id = body["scenario"];
      const std::string rel = "scenarios/" + id + ".json";
      if (!safe_name(id) || !ws.exists(rel)) return send_problem(res, 404, "NOT_FOUND", "no scenario '" + id + "'");
      auto loaded = std::make_shared<LoadedScenario>(load_scenario(ws.read(rel), ws));
      send_json(res, 202, start_job(id, std::move(loaded), seed));
    });

    http.Get(R"(/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto job = find_job(req.matches[1]);
      if (!job) return send_problem(res, 404, "NOT_FOUND", "no run '" + std::string(req.matches[1]) + "'");
      std::lock_guard lock(jobs_mutex);
      send_json(res, 200, status_json(*job));
    });

    http.Get(R"(/runs/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto series = metrics_of(id);
      if (!series) {
        if (find_job(id)) return send_problem(res, 409, "NOT_DONE", "run '" + id + "' has not finished");
        return send_problem(res, 404, "NOT_FOUND", "no run '" + id + "'");
      }
      json out = metric_series_json(series->table.names, series->table.rows);
      send_json(res, 200, {{"id", id}, {"metrics", series->table.names}, {"series", out}});
    });

    http.Get("/compare", [this](const httplib::Request& req, httplib::Response& res) {
      std::vector<RunSeries> runs;
      std::stringstream ids(req.get_param_value("runs"));
      for (std::string id; std::getline(ids, id, ',');) {
        if (id.empty()) continue;
        auto series = metrics_of(id);
        if (!series) return send_problem(res, 404, "NOT_FOUND", "no finished run '" + id + "'");
        series->run_id = id;
        runs.push_back(std::move(*series));
      }
      Comparison c = compare_runs(runs);
      json out = comparison_json(c);
      out["csv"] = comparison_csv(c);
      send_json(res, 200, out);
    });
  }

  std::shared_ptr<Job> find_job(const std::string& id) {
    std::lock_guard lock(jobs_mutex);
    auto it = jobs.find(id);
    return it == jobs.end() ? nullptr : it->second;
  }

  // Finished job, or an archive already on disk under runs_dir.
  std::optional<RunSeries> metrics_of(const std::string& id) {
    if (auto job = find_job(id)) {
      std::lock_guard lock(jobs_mutex);
      if (job->state != JobState::Done) return std::nullopt;
      return RunSeries{id, {job->metric_names, job->rows}};
    }
    if (!safe_name(id) || !fs::exists(runs_dir / id / "meta.json")) return std::nullopt;
    RunArchive archive = open_archive(runs_dir / id);
    return RunSeries{archive.run_id, read_archive_metrics(archive)};
  }

  json status_json(const Job& job) {
    json out = {{"id", job.id},
                {"scenario", job.scenario},
                {"state", to_string(job.state)},
                {"progress", {{"ticks_completed", job.ticks_done}, {"ticks_total", job.ticks_total}}}};
    if (job.archive) {
      out["archive"] = job.archive->run_id;
      out["seed"] = job.archive->seed;
    }
    if (!job.error.is_null()) out["error"] = job.error;
    return out;
  }

  json start_job(const std::string& scenario, std::shared_ptr<LoadedScenario> loaded,
                 std::optional<std::uint64_t> seed) {
    auto job = std::make_shared<Job>();
    job->id = std::to_string(next_job++);
    job->scenario = scenario;
    job->ticks_total = loaded->plan->iterations;
    json status;
    {
      std::lock_guard lock(jobs_mutex);
      jobs[job->id] = job;
      status = status_json(*job);
      threads.emplace_back([this, job, loaded, seed] { run_job(job, loaded, seed); });
    }
    return status;
  }

  void run_job(const std::shared_ptr<Job>& job, const std::shared_ptr<LoadedScenario>& loaded,
               std::optional<std::uint64_t> seed) {
    {
      std::lock_guard lock(jobs_mutex);
      job->state = JobState::Running;
    }
    try {
      RunResult result = run_scenario(*loaded, seed, [&](const ModelState& s, const TickReport&) {
        std::lock_guard lock(jobs_mutex);
        job->ticks_done = s.tick;
      });
      RunArchive archive = persist_run(result, runs_dir);
      std::lock_guard lock(jobs_mutex);
      job->archive = std::move(archive);
      job->metric_names = std::move(result.metric_names);
      job->rows = std::move(result.rows);
      job->state = JobState::Done;
    } catch (const Error& e) {
      std::lock_guard lock(jobs_mutex);
      job->error = to_json(e.diagnostic());
      job->state = JobState::Failed;
    } catch (const std::exception& e) {
      std::lock_guard lock(jobs_mutex);
      job->error = {{"code", "INTERNAL"}, {"message", e.what()}};
      job->state = JobState::Failed;
    }
  }

  void join_all() {
    std::vector<std::thread> pending;
    {
      std::lock_guard lock(jobs_mutex);
      pending.swap(threads);
    }
    for (auto& t : pending) t.join();
  }
};

ApiServer::ApiServer(fs::path workspace, std::optional<fs::path> runs_dir)
    : impl_(std::make_unique<Impl>(std::move(workspace), std::move(runs_dir))) {}

ApiServer::~ApiServer() {
  stop();
  impl_->join_all();
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::serve() { return impl_->http.listen_after_bind(); }

void ApiServer::stop() { impl_->http.stop(); }

void ApiServer::wait_for_jobs() { impl_->join_all(); }

}  // namespace facetsim
