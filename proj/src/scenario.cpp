#include "facetsim/scenario.hpp"

#include <set>

#include "json_util.hpp"

namespace facetsim {

using namespace detail;

namespace {

std::int64_t positive_integer(const json& obj, const std::string& path, const char* key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  std::int64_t v = require_integer(obj, path, key);
  if (v < 1) schema_error(child_path(path, key), "must be at least 1");
  return v;
}

Value json_to_value(const json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) return v.get<std::string>();
  schema_error(path, "expected a number, boolean or string");
}

json value_to_json(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Number: return v.as_number();
    case ValueKind::Boolean: return v.as_bool();
    case ValueKind::Text: return v.as_text();
  }
  return nullptr;
}

Globals parse_globals(const json& j, const std::string& path) {
  require_object(j, path);
  allow_keys(j, path,
             {"iterations", "data_collection_interval", "seed", "populations", "model_var_overrides", "ui_params",
              "randomize"});
  Globals g;
  g.iterations = positive_integer(j, path, "iterations", 1);
  g.data_collection_interval = positive_integer(j, path, "data_collection_interval", 1);
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      schema_error(child_path(path, "seed"), "seed must be a non-negative integer");
    }
    g.seed = s.get<std::uint64_t>();
  }
  if (j.contains("populations")) {
    const std::string p = child_path(path, "populations");
    require_object(j.at("populations"), p);
    for (const auto& [type, count] : j.at("populations").items()) {
      if (!count.is_number_integer() || count.get<std::int64_t>() < 0) {
        schema_error(child_path(p, type), "population must be a non-negative integer");
      }
      g.populations[type] = count.get<std::int64_t>();
    }
  }
  if (j.contains("model_var_overrides")) {
    const std::string p = child_path(path, "model_var_overrides");
    require_object(j.at("model_var_overrides"), p);
    for (const auto& [name, v] : j.at("model_var_overrides").items()) {
      g.model_var_overrides[name] = json_to_value(v, child_path(p, name));
    }
  }
  if (j.contains("ui_params")) {
    require_object(j.at("ui_params"), child_path(path, "ui_params"));
    g.ui_params = j.at("ui_params");
  }
  const json& randomize = require_array(j, path, "randomize", false);
  for (std::size_t i = 0; i < randomize.size(); ++i) {
    const std::string p = index_path(child_path(path, "randomize"), i);
    require_object(randomize[i], p);
    allow_keys(randomize[i], p, {"agent_type", "variable"});
    g.randomize.push_back({require_name(randomize[i], p, "agent_type"), require_name(randomize[i], p, "variable")});
  }
  return g;
}

}  // namespace

ScenarioDoc parse_scenario(std::string_view text) { return parse_scenario(parse_json_text(text)); }

ScenarioDoc parse_scenario(const json& j) {
  const std::string root;
  require_object(j, root);
  allow_keys(j, root, {"name", "description", "facets", "flow_bindings", "policies", "globals", "metrics"});
  ScenarioDoc doc;
  doc.name = require_name(j, root, "name");
  doc.description = optional_string(j, root, "description").value_or("");
  const json& facets = require_array(j, root, "facets", true);
  for (std::size_t i = 0; i < facets.size(); ++i) {
    if (!facets[i].is_string()) schema_error(index_path("facets", i), "expected a facet name");
    doc.facets.push_back(facets[i].get<std::string>());
  }
  if (j.contains("flow_bindings")) {
    require_object(j.at("flow_bindings"), "flow_bindings");
    for (const auto& [type, path] : j.at("flow_bindings").items()) {
      if (!path.is_string()) schema_error(child_path("flow_bindings", type), "expected a relative path");
      doc.flow_bindings[type] = path.get<std::string>();
    }
  }
  const json& policies = require_array(j, root, "policies", false);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const std::string p = index_path("policies", i);
    if (policies[i].is_string()) {
      doc.policies.emplace_back(policies[i].get<std::string>());
    } else if (policies[i].is_object()) {
      try {
        doc.policies.emplace_back(parse_policy(policies[i]));
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " (in " + p + ")",
                    e.location().empty() ? p : child_path(p, e.location()));
      }
    } else {
      schema_error(p, "expected a policy path or an inline policy");
    }
  }
  doc.globals = parse_globals(j.contains("globals") ? j.at("globals") : json::object(), "globals");
  const json& metrics = require_array(j, root, "metrics", false);
  for (std::size_t i = 0; i < metrics.size(); ++i) doc.metrics.push_back(parse_metric(metrics[i], index_path("metrics", i)));
  return doc;
}

json scenario_to_json(const ScenarioDoc& doc) {
  json j = json::object();
  j["name"] = doc.name;
  if (!doc.description.empty()) j["description"] = doc.description;
  j["facets"] = doc.facets;
  j["flow_bindings"] = doc.flow_bindings;
  json policies = json::array();
  for (const auto& entry : doc.policies) {
    if (const auto* path = std::get_if<std::string>(&entry)) {
      policies.push_back(*path);
    } else {
      policies.push_back(policy_to_json(std::get<Policy>(entry)));
    }
  }
  j["policies"] = std::move(policies);

  const Globals& g = doc.globals;
  json globals = {{"iterations", g.iterations},
                  {"data_collection_interval", g.data_collection_interval},
                  {"seed", g.seed},
                  {"populations", g.populations}};
  json overrides = json::object();
  for (const auto& [name, v] : g.model_var_overrides) overrides[name] = value_to_json(v);
  globals["model_var_overrides"] = std::move(overrides);
  globals["ui_params"] = g.ui_params;
  if (!g.randomize.empty()) {
    json r = json::array();
    for (const auto& x : g.randomize) r.push_back({{"agent_type", x.agent_type}, {"variable", x.variable}});
    globals["randomize"] = std::move(r);
  }
  j["globals"] = std::move(globals);

  json metrics = json::array();
  for (const auto& m : doc.metrics) metrics.push_back(metric_to_json(m));
  j["metrics"] = std::move(metrics);
  return j;
}

std::string save_scenario(const ScenarioDoc& doc) { return scenario_to_json(doc).dump(2) + "\n"; }

bool equivalent(const LoadedScenario& a, const LoadedScenario& b) {
  return a.doc == b.doc && a.files == b.files && a.facet_order == b.facet_order &&
         structurally_equal(*a.model, *b.model);
}

namespace {

void add_error(ValidationReport& report, const Error& e, const std::string& scope) {
  if (const auto* vf = dynamic_cast<const ValidationFailed*>(&e)) {
    report.merge(vf->report(), scope);
  } else {
    ValidationReport one;
    one.errors.push_back(e.diagnostic());
    report.merge(one, scope);
  }
}

// Reads a referenced file, recording failures instead of throwing.
std::optional<std::string> fetch(const Workspace& ws, const std::string& path, ValidationReport& report,
                                 std::map<std::string, std::string>& files) {
  try {
    std::string bytes = ws.read(path);
    files[path] = bytes;
    return bytes;
  } catch (const Error& e) {
    add_error(report, e, "");
    return std::nullopt;
  }
}

}  // namespace

LoadedScenario load_scenario(std::string_view text, const Workspace& ws) {
  LoadedScenario out;
  out.source = std::string(text);
  try {
    out.doc = parse_scenario(text);
  } catch (const ValidationFailed&) {
    throw;
  } catch (const Error& e) {
    ValidationReport report;
    report.errors.push_back(e.diagnostic());
    throw ValidationFailed(std::move(report));
  }
  const ScenarioDoc& doc = out.doc;
  ValidationReport report;

  // Facets: only the failures of files this scenario actually needs count.
  Workspace::FacetCatalog catalog = ws.facets();
  std::optional<CompositeModel> model;
  try {
    out.facet_order = resolve_dependencies(doc.facets, catalog.manifests);
    std::vector<FacetManifest> chosen;
    for (const auto& name : out.facet_order) {
      chosen.push_back(catalog.manifests.at(name));
      out.files[catalog.paths.at(name)] = ws.read(catalog.paths.at(name));
    }
    model = compose(base_model(), chosen);
  } catch (const Error& e) {
    add_error(report, e, "facets");
  }
  for (const auto& d : catalog.report.errors) {
    for (const auto& name : doc.facets) {
      if (d.location.starts_with("facets/" + name + ".json")) report.errors.push_back(d);
    }
  }

  RunPlan plan;
  for (const auto& [type, path] : doc.flow_bindings) {
    auto bytes = fetch(ws, path, report, out.files);
    if (!bytes) continue;
    try {
      BehaviourFlow flow = load_flow(*bytes);
      if (!flow.agent_type().empty() && flow.agent_type() != type) {
        report.error("FLOW_TYPE_MISMATCH", path,
                     "flow declares agent type '" + flow.agent_type() + "' but is bound to '" + type + "'",
                     {flow.agent_type(), type});
      }
      plan.flows.emplace(type, flow.with_agent_type(type));
    } catch (const Error& e) {
      add_error(report, e, path);
    }
  }

  for (std::size_t i = 0; i < doc.policies.size(); ++i) {
    if (const auto* policy = std::get_if<Policy>(&doc.policies[i])) {
      plan.policies.push_back(*policy);
      continue;
    }
    const std::string& path = std::get<std::string>(doc.policies[i]);
    auto bytes = fetch(ws, path, report, out.files);
    if (!bytes) continue;
    try {
      plan.policies.push_back(parse_policy(std::string_view(*bytes)));
    } catch (const Error& e) {
      add_error(report, e, path);
    }
  }

  plan.metrics = doc.metrics;
  plan.iterations = doc.globals.iterations;
  plan.collection_interval = doc.globals.data_collection_interval;
  plan.seed = doc.globals.seed;
  plan.populations = doc.globals.populations;
  plan.model_var_overrides = doc.globals.model_var_overrides;
  plan.randomize = doc.globals.randomize;

  if (model) {
    out.model = std::make_shared<const CompositeModel>(std::move(*model));
    plan.model = out.model;
    // A flow that failed to load is already reported; do not repeat it as
    // MISSING_FLOW.
    ValidationReport plan_report = check_plan(plan);
    for (const auto& d : plan_report.errors) {
      if (d.code == "MISSING_FLOW" && doc.flow_bindings.count(d.location)) continue;
      report.errors.push_back(d);
    }
    for (const auto& d : plan_report.warnings) report.warnings.push_back(d);
  }
  if (!report.ok()) throw ValidationFailed(std::move(report));
  out.plan = std::make_shared<const RunPlan>(std::move(plan));
  out.report = std::move(report);
  return out;
}

LoadedScenario load_scenario_file(const std::filesystem::path& path, const Workspace& ws) {
  return load_scenario(read_file(path), ws);
}

RunResult run_scenario(const LoadedScenario& loaded, std::optional<std::uint64_t> seed, const TickObserver& observer) {
  std::shared_ptr<const RunPlan> plan = loaded.plan;
  if (seed && *seed != plan->seed) {
    auto copy = std::make_shared<RunPlan>(*plan);
    copy->seed = *seed;
    plan = std::move(copy);
  }
  RunResult result = run_plan(plan, observer);
  result.snapshot.name = loaded.doc.name;
  result.snapshot.document = loaded.source;
  result.snapshot.files = loaded.files;
  return result;
}

}  // namespace facetsim
