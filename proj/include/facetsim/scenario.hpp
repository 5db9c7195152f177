#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "facetsim/facet.hpp"
#include "facetsim/metrics.hpp"
#include "facetsim/policy.hpp"
#include "facetsim/sim.hpp"
#include "facetsim/workspace.hpp"

namespace facetsim {

struct Globals {
  std::int64_t iterations = 1;
  std::int64_t data_collection_interval = 1;
  std::uint64_t seed = 0;
  std::map<std::string, std::int64_t> populations;
  VarMap model_var_overrides;
  nlohmann::json ui_params = nlohmann::json::object();  // passed through untouched
  std::vector<RandomizedVar> randomize;

  friend bool operator==(const Globals&, const Globals&) = default;
};

/// A policy entry is either a workspace-relative file or written inline.
using PolicyEntry = std::variant<std::string, Policy>;

struct ScenarioDoc {
  std::string name;
  std::string description;
  std::vector<std::string> facets;
  std::map<std::string, std::string> flow_bindings;  // agent type -> relative path
  std::vector<PolicyEntry> policies;
  Globals globals;
  std::vector<MetricSpec> metrics;

  friend bool operator==(const ScenarioDoc&, const ScenarioDoc&) = default;
};

/// Schema check only. Errors: MALFORMED_JSON, SCHEMA_VIOLATION, parse codes.
ScenarioDoc parse_scenario(std::string_view text);
ScenarioDoc parse_scenario(const nlohmann::json& j);
inline ScenarioDoc parse_scenario(const std::string& document) { return parse_scenario(std::string_view(document)); }
inline ScenarioDoc parse_scenario(const char* document) { return parse_scenario(std::string_view(document)); }
nlohmann::json scenario_to_json(const ScenarioDoc& doc);
std::string save_scenario(const ScenarioDoc& doc);

struct LoadedScenario {
  ScenarioDoc doc;
  std::string source;
  std::vector<std::string> facet_order;  // dependencies resolved
  std::shared_ptr<const CompositeModel> model;
  std::shared_ptr<const RunPlan> plan;
  std::map<std::string, std::string> files;  // every referenced artifact
  ValidationReport report;                   // warnings only
};

/// Same document, same referenced bytes, structurally equal composite.
bool equivalent(const LoadedScenario& a, const LoadedScenario& b);

/// Resolves every reference against the workspace and validates the whole
/// set; all problems are reported together (ValidationFailed). Codes include
/// MISSING_FILE, BAD_PATH, MISSING_FLOW, MISSING_POPULATION, UNKNOWN_TYPE,
/// MISSING_DEPENDENCY and everything the module validators produce.
LoadedScenario load_scenario(std::string_view text, const Workspace& ws);
LoadedScenario load_scenario_file(const std::filesystem::path& path, const Workspace& ws);

/// Runs the loaded scenario; `seed` overrides the document's seed.
RunResult run_scenario(const LoadedScenario& loaded, std::optional<std::uint64_t> seed = std::nullopt,
                       const TickObserver& observer = {});

}  // namespace facetsim
