// facetsim: validate artifacts, run scenarios, emit skeleton flows, compare
// archived runs. Exit codes: 0 ok, 1 validation error, 2 runtime error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "facetsim/archive.hpp"
#include "facetsim/scenario.hpp"
#include "facetsim/workspace.hpp"

namespace fs = std::filesystem;
using namespace facetsim;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

struct Options {
  bool json = false;
  std::string workspace;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string agent_type;
  bool force = false;
  std::vector<std::string> paths;
};

void print_report(const ValidationReport& report, bool as_json) {
  if (as_json) {
    std::cout << to_json(report).dump(2) << "\n";
    return;
  }
  auto line = [](const char* level, const Diagnostic& d) {
    std::cerr << level << " " << d.code;
    if (!d.location.empty()) std::cerr << " [" << d.location << "]";
    std::cerr << ": " << d.message << "\n";
  };
  for (const auto& d : report.errors) line("error", d);
  for (const auto& d : report.warnings) line("warning", d);
}

ValidationReport report_of(const Error& e) {
  if (const auto* vf = dynamic_cast<const ValidationFailed*>(&e)) return vf->report();
  ValidationReport r;
  r.errors.push_back(e.diagnostic());
  return r;
}

Workspace open_workspace(const Options& o, const fs::path& near) {
  return Workspace(o.workspace.empty() ? find_workspace_root(near) : fs::path(o.workspace));
}

int cmd_validate(const Options& o) {
  const std::vector<std::string> paths = o.paths.empty() ? std::vector<std::string>{"."} : o.paths;
  ValidationReport report;
  for (const auto& p : paths) {
    std::error_code ec;
    if (!fs::exists(p, ec)) {
      report.error("MISSING_FILE", p, "no such file or directory");
      continue;
    }
    Workspace ws = open_workspace(o, p);
    if (fs::is_directory(p, ec)) {
      report.merge(validate_workspace(Workspace(p)), p);
    } else {
      report.merge(validate_file(p, ws), p);
    }
  }
  print_report(report, o.json);
  if (!o.json && report.ok()) {
    std::cerr << "ok (" << report.warnings.size() << " warning" << (report.warnings.size() == 1 ? "" : "s") << ")\n";
  }
  return report.ok() ? kOk : kInvalid;
}

int cmd_run(const Options& o) {
  Workspace ws = open_workspace(o, o.scenario);
  LoadedScenario loaded;
  try {
    loaded = load_scenario_file(o.scenario, ws);
  } catch (const Error& e) {
    print_report(report_of(e), o.json);
    return kInvalid;
  }
  try {
    RunResult result = run_scenario(loaded, o.seed);
    fs::path out = o.out.empty() ? ws.root() / "runs" : fs::path(o.out);
    RunArchive archive = persist_run(result, out);
    if (o.json) {
      std::cout << nlohmann::json{{"archive", archive.dir.string()},
                                  {"run_id", archive.run_id},
                                  {"seed", archive.seed},
                                  {"warnings", result.warnings}}
                       .dump(2)
                << "\n";
    } else {
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << archive.dir.string() << "\n";
    }
    return kOk;
  } catch (const Error& e) {
    print_report(report_of(e), o.json);
    return kRuntime;
  }
}

int cmd_new_flow(const Options& o) {
  Workspace ws = open_workspace(o, o.scenario.empty() ? fs::current_path() : fs::path(o.scenario));
  std::shared_ptr<const CompositeModel> model;
  try {
    if (!o.scenario.empty()) {
      model = load_scenario_file(o.scenario, ws).model;
    } else {
      Workspace::FacetCatalog catalog = ws.facets();
      if (!catalog.report.ok()) throw ValidationFailed(catalog.report);
      model = std::make_shared<const CompositeModel>(compose_workspace(catalog));
    }
  } catch (const Error& e) {
    print_report(report_of(e), o.json);
    return kInvalid;
  }
  const AgentTypeSpec* type = model->find_type(o.agent_type);
  if (!type) {
    ValidationReport r;
    r.error("UNKNOWN_TYPE", o.agent_type, "no selected facet creates agent type '" + o.agent_type + "'",
            {o.agent_type});
    print_report(r, o.json);
    return kInvalid;
  }
  fs::path target = o.out.empty() ? ws.root() / "flows" / (o.agent_type + ".graphml") : fs::path(o.out);
  std::error_code ec;
  if (fs::exists(target, ec) && !o.force) {
    ValidationReport r;
    r.error("FILE_EXISTS", target.string(), "refusing to overwrite; pass --force");
    print_report(r, o.json);
    return kInvalid;
  }
  try {
    write_file_atomic(target, emit_skeleton_flow(*type));
  } catch (const Error& e) {
    print_report(report_of(e), o.json);
    return kRuntime;
  }
  if (o.json) {
    std::cout << nlohmann::json{{"path", target.string()}, {"nodes", type->behaviours.size() + 1}}.dump(2) << "\n";
  } else {
    std::cout << target.string() << "\n";
  }
  return kOk;
}

int cmd_compare(const Options& o) {
  try {
    if (o.paths.size() < 2) throw Error("NEED_TWO_RUNS", "compare needs at least two archive directories");
    std::vector<RunArchive> archives;
    for (const auto& p : o.paths) archives.push_back(open_archive(p));
    Comparison c = compare_archives(archives);
    std::cout << (o.json ? comparison_json(c).dump(2) + "\n" : comparison_csv(c));
    return kOk;
  } catch (const Error& e) {
    print_report(report_of(e), o.json);
    return kInvalid;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facetsim: facet-composed agent-based policy simulation"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("--json", o.json, "Machine-readable output");
  app.add_option("--workspace", o.workspace, "Workspace root (default: nearest parent with facets/)");

  auto* validate = app.add_subcommand("validate", "Validate facets, flows, policies and scenarios");
  validate->add_option("paths", o.paths, "Files or workspace directories (default: .)");

  auto* run = app.add_subcommand("run", "Run a scenario and archive the result");
  run->add_option("--scenario", o.scenario, "Scenario JSON file")->required();
  run->add_option("--out", o.out, "Archive parent directory (default: <workspace>/runs)");
  run->add_option("--seed", o.seed, "Override the scenario seed");

  auto* new_flow = app.add_subcommand("new-flow", "Write a skeleton BehaviourFlow for an agent type");
  new_flow->add_option("--agent-type", o.agent_type, "Agent type")->required();
  new_flow->add_option("--scenario", o.scenario, "Take the facet selection from this scenario");
  new_flow->add_option("--out", o.out, "Output file (default: <workspace>/flows/<type>.graphml)");
  new_flow->add_flag("--force", o.force, "Overwrite an existing file");

  auto* compare = app.add_subcommand("compare", "Compare archived runs as CSV");
  compare->add_option("archives", o.paths, "Archive directories");

  for (auto* sub : {validate, run, new_flow, compare}) {
    sub->add_flag("--json", o.json, "Machine-readable output");
    sub->add_option("--workspace", o.workspace, "Workspace root");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*run) return cmd_run(o);
    if (*new_flow) return cmd_new_flow(o);
    return cmd_compare(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
