#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace facetsim {

enum class JobState { Queued, Running, Done, Failed };

std::string_view to_string(JobState state);

/// REST front end over one workspace. Artifact writes go through the same
/// validators as the CLI; runs execute on one background thread each and
/// are persisted under `runs_dir` (default <workspace>/runs).
///
///   GET  /facets                  GET|PUT /flows/{agent_type}
///   GET|POST /policies            PUT|DELETE /policies/{name}
///   GET|POST /scenarios           POST /runs
///   GET  /runs/{id}               GET /runs/{id}/metrics
///   GET  /compare?runs=a,b
class ApiServer {
 public:
  explicit ApiServer(std::filesystem::path workspace, std::optional<std::filesystem::path> runs_dir = {});
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool serve();
  void stop();
  /// Joins every finished or running job thread.
  void wait_for_jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace facetsim
