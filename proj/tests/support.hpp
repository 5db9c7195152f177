#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "facetsim/facet.hpp"
#include "facetsim/flow.hpp"
#include "facetsim/sim.hpp"

namespace testing {

namespace fs = std::filesystem;

inline const fs::path kDemo = FACETSIM_DEMO_DIR;
inline const fs::path kFixtures = FACETSIM_FIXTURES_DIR;

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("facetsim-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

/// Copy of the demo workspace that a test may modify.
inline void copy_demo(const fs::path& to) {
  for (const char* dir : {"facets", "flows", "policies", "scenarios"}) {
    fs::copy(kDemo / dir, to / dir, fs::copy_options::recursive);
  }
}

inline facetsim::FlowNode node(std::string id, std::optional<std::string> behaviour, double p = 1.0) {
  return {std::move(id), std::move(behaviour), facetsim::TriggerSpec::constant(p)};
}

inline facetsim::TriggerSpec trigger(const std::string& json) { return facetsim::parse_trigger_json(json); }

/// Composite built straight from manifest JSON texts, in the given order.
inline facetsim::CompositeModel composite(const std::vector<std::string>& manifests) {
  std::vector<facetsim::FacetManifest> facets;
  for (const auto& m : manifests) facets.push_back(facetsim::parse_manifest(m));
  return facetsim::compose(facetsim::base_model(), facets);
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

/// Runs a shell command, capturing stdout (stderr goes to stdout when
/// `merge_stderr`).
inline CommandResult run_command(const std::string& cmd, bool merge_stderr = false) {
  CommandResult r;
  std::string full = cmd + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace testing
