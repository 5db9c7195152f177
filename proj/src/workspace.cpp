#include "facetsim/workspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <system_error>

#include "facetsim/policy.hpp"
#include "facetsim/scenario.hpp"
#include "json_util.hpp"

namespace fs = std::filesystem;

namespace facetsim {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("MISSING_FILE", "cannot read " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("STORAGE_FAILURE", "cannot write " + tmp.string(), path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("STORAGE_FAILURE", "short write to " + tmp.string(), path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error("STORAGE_FAILURE", "cannot replace " + path.string() + ": " + ec.message(), path.string());
}

Workspace::Workspace(fs::path root) : root_(fs::weakly_canonical(fs::absolute(std::move(root)))) {}

fs::path Workspace::resolve(std::string_view relative) const {
  fs::path rel(relative);
  if (relative.empty() || rel.is_absolute() || rel.has_root_name()) {
    throw Error("BAD_PATH", "'" + std::string(relative) + "' must be relative to the workspace",
                std::string(relative));
  }
  fs::path normal = rel.lexically_normal();
  if (normal.empty() || *normal.begin() == "..") {
    throw Error("BAD_PATH", "'" + std::string(relative) + "' leaves the workspace", std::string(relative));
  }
  return root_ / normal;
}

bool Workspace::exists(std::string_view relative) const {
  std::error_code ec;
  return fs::is_regular_file(resolve(relative), ec);
}

std::string Workspace::read(std::string_view relative) const {
  fs::path p = resolve(relative);
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) {
    throw Error("MISSING_FILE", "'" + std::string(relative) + "' does not exist in the workspace",
                std::string(relative));
  }
  return read_file(p);
}

void Workspace::write(std::string_view relative, std::string_view bytes) const {
  write_file_atomic(resolve(relative), bytes);
}

void Workspace::remove(std::string_view relative) const {
  std::error_code ec;
  fs::remove(resolve(relative), ec);
}

std::vector<std::string> Workspace::list(std::string_view dir, std::string_view extension) const {
  std::vector<std::string> out;
  std::error_code ec;
  fs::path base = resolve(dir);
  if (!fs::is_directory(base, ec)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(base, ec)) {
    if (!entry.is_regular_file() || entry.path().extension() != extension) continue;
    out.push_back(fs::relative(entry.path(), root_).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Workspace::FacetCatalog Workspace::facets() const {
  FacetCatalog catalog;
  for (const auto& path : list("facets", ".json")) {
    const std::string stem = fs::path(path).stem().string();
    try {
      FacetManifest m = parse_manifest(std::string_view(read(path)));
      if (m.name != stem) {
        catalog.report.error("FACET_NAME_MISMATCH", path,
                             "facet '" + m.name + "' must live in facets/" + m.name + ".json", {m.name});
        continue;
      }
      catalog.paths[m.name] = path;
      catalog.manifests.emplace(m.name, std::move(m));
    } catch (const Error& e) {
      ValidationReport one;
      one.errors.push_back(e.diagnostic());
      catalog.report.merge(one, path);
    }
  }
  return catalog;
}

fs::path find_workspace_root(const fs::path& start) {
  std::error_code ec;
  fs::path dir = fs::absolute(start);
  if (!fs::is_directory(dir, ec)) dir = dir.parent_path();
  for (fs::path p = dir; !p.empty(); p = p.parent_path()) {
    if (fs::is_directory(p / "facets", ec)) return p;
    if (p == p.parent_path()) break;
  }
  return dir;
}

CompositeModel compose_workspace(const Workspace::FacetCatalog& catalog) {
  std::vector<std::string> names;
  for (const auto& [name, _] : catalog.manifests) names.push_back(name);
  std::vector<FacetManifest> ordered;
  for (const auto& name : resolve_dependencies(names, catalog.manifests)) ordered.push_back(catalog.manifests.at(name));
  return compose(base_model(), ordered);
}

namespace {

ValidationReport from_error(const Error& e) {
  if (const auto* vf = dynamic_cast<const ValidationFailed*>(&e)) return vf->report();
  ValidationReport r;
  r.errors.push_back(e.diagnostic());
  return r;
}

// The composite every standalone flow or policy is checked against.
std::optional<CompositeModel> workspace_model(const Workspace& ws, ValidationReport& report) {
  Workspace::FacetCatalog catalog = ws.facets();
  report.merge(catalog.report);
  try {
    return compose_workspace(catalog);
  } catch (const Error& e) {
    report.merge(from_error(e), "facets");
    return std::nullopt;
  }
}

}  // namespace

ValidationReport validate_facet_document(std::string_view text, std::string_view expected_name) {
  ValidationReport report;
  try {
    FacetManifest m = parse_manifest(text);
    if (!expected_name.empty() && m.name != expected_name) {
      report.error("FACET_NAME_MISMATCH", m.name,
                   "facet '" + m.name + "' must live in facets/" + m.name + ".json", {m.name});
    }
  } catch (const Error& e) {
    report.merge(from_error(e));
  }
  return report;
}

ValidationReport validate_flow_document(std::string_view graphml, const Workspace& ws, std::string_view agent_type) {
  ValidationReport report;
  BehaviourFlow flow;
  try {
    flow = load_flow(graphml);
  } catch (const Error& e) {
    return from_error(e);
  }
  std::string type = agent_type.empty() ? flow.agent_type() : std::string(agent_type);
  if (!agent_type.empty() && !flow.agent_type().empty() && flow.agent_type() != agent_type) {
    report.error("FLOW_TYPE_MISMATCH", flow.agent_type(),
                 "flow declares agent type '" + flow.agent_type() + "' but is stored for '" + type + "'",
                 {flow.agent_type(), type});
  }
  ValidationReport model_report;
  std::optional<CompositeModel> model = workspace_model(ws, model_report);
  const AgentTypeSpec* spec = model ? model->find_type(type) : nullptr;
  if (!model) {
    report.merge(model_report);
    report.merge(validate_flow_structure(flow));
  } else if (!spec) {
    report.error("UNKNOWN_TYPE", type.empty() ? "flow" : type,
                 type.empty() ? "flow does not name its agent type" : "no facet creates agent type '" + type + "'",
                 {type});
    report.merge(validate_flow_structure(flow));
  } else {
    report.merge(validate_flow(flow, flow_schema(*model, *spec)));
  }
  return report;
}

ValidationReport validate_policy_document(std::string_view text, const Workspace& ws) {
  ValidationReport report;
  Policy policy;
  try {
    policy = parse_policy(text);
  } catch (const Error& e) {
    return from_error(e);
  }
  std::optional<CompositeModel> model = workspace_model(ws, report);
  if (model) report.merge(check_policy(policy, *model));
  return report;
}

ValidationReport validate_scenario_document(std::string_view text, const Workspace& ws) {
  try {
    return load_scenario(text, ws).report;
  } catch (const Error& e) {
    return from_error(e);
  }
}

ArtifactKind detect_kind(const fs::path& path, std::string_view text) {
  if (path.extension() == ".graphml" || path.extension() == ".xml") return ArtifactKind::Flow;
  if (path.extension() != ".json") return ArtifactKind::Unknown;
  const std::string folder = path.parent_path().filename().string();
  if (folder == "facets") return ArtifactKind::Facet;
  if (folder == "policies") return ArtifactKind::Policy;
  if (folder == "scenarios") return ArtifactKind::Scenario;
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_object()) return ArtifactKind::Unknown;
  if (j.contains("target_agent_type")) return ArtifactKind::Policy;
  if (j.contains("flow_bindings") || j.contains("globals")) return ArtifactKind::Scenario;
  if (j.contains("agent_types") || j.contains("depends_on") || j.contains("model_vars")) return ArtifactKind::Facet;
  return ArtifactKind::Unknown;
}

ValidationReport validate_file(const fs::path& path, const Workspace& ws) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    return from_error(e);
  }
  switch (detect_kind(path, text)) {
    case ArtifactKind::Facet: {
      const std::string folder = path.parent_path().filename().string();
      return validate_facet_document(text, folder == "facets" ? path.stem().string() : std::string());
    }
    case ArtifactKind::Flow: return validate_flow_document(text, ws);
    case ArtifactKind::Policy: return validate_policy_document(text, ws);
    case ArtifactKind::Scenario: return validate_scenario_document(text, ws);
    case ArtifactKind::Unknown: break;
  }
  ValidationReport r;
  r.error("UNKNOWN_ARTIFACT", path.string(), "cannot tell what kind of artifact this file is");
  return r;
}

ValidationReport validate_workspace(const Workspace& ws) {
  ValidationReport report;
  for (const char* dir : {"facets", "policies", "scenarios"}) {
    for (const auto& rel : ws.list(dir, ".json")) report.merge(validate_file(ws.resolve(rel), ws), rel);
  }
  for (const auto& rel : ws.list("flows", ".graphml")) report.merge(validate_file(ws.resolve(rel), ws), rel);
  return report;
}

}  // namespace facetsim
