#include "facetsim/facet.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json_util.hpp"

namespace facetsim {

using nlohmann::json;
using namespace detail;

std::string_view to_string(ActionOp op) {
  switch (op) {
    case ActionOp::Set: return "set";
    case ActionOp::Add: return "add";
    case ActionOp::Multiply: return "multiply";
  }
  return "?";
}

std::optional<ActionOp> parse_action_op(std::string_view text) {
  if (text == "set") return ActionOp::Set;
  if (text == "add") return ActionOp::Add;
  if (text == "multiply") return ActionOp::Multiply;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Manifest parsing

namespace {

bool is_type_name(std::string_view name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_' || u == '-';
  });
}

Expression default_init(ValueKind kind) {
  switch (kind) {
    case ValueKind::Number: return parse_expression("0");
    case ValueKind::Boolean: return parse_expression("false");
    case ValueKind::Text: return parse_expression("\"\"");
  }
  return {};
}

VarDecl read_var(const json& j, const std::string& path) {
  require_object(j, path);
  allow_keys(j, path, {"name", "kind", "init", "range"});
  VarDecl v;
  v.name = require_name(j, path, "name");
  if (!is_identifier(v.name)) schema_error(child_path(path, "name"), "'" + v.name + "' is not a valid variable name");
  std::string kind = require_string(j, path, "kind");
  auto k = parse_value_kind(kind);
  if (!k) schema_error(child_path(path, "kind"), "unknown kind '" + kind + "' (number, boolean, text)");
  v.kind = *k;
  v.init = j.contains("init") ? read_expression(j["init"], child_path(path, "init")) : default_init(v.kind);
  if (j.contains("range")) {
    const json& r = j["range"];
    const std::string rp = child_path(path, "range");
    if (v.kind != ValueKind::Number) schema_error(rp, "only number variables can declare a range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      schema_error(rp, "range must be [lo, hi]");
    }
    v.range = NumberRange{r[0].get<double>(), r[1].get<double>()};
    if (!(v.range->lo <= v.range->hi)) schema_error(rp, "range lower bound exceeds upper bound");
  }
  return v;
}

UpdateAction read_update(const json& j, const std::string& path, std::string_view op_text) {
  allow_keys(j, path, {"op", "variable", "value"});
  auto op = parse_action_op(op_text);
  if (!op) {
    throw Error("UNKNOWN_OP", "unknown action op '" + std::string(op_text) + "' (set, add, multiply, match)",
                child_path(path, "op"));
  }
  UpdateAction a;
  a.op = *op;
  a.variable = require_name(j, path, "variable");
  a.operand = read_expression(require_field(j, path, "value"), child_path(path, "value"));
  return a;
}

std::vector<UpdateAction> read_update_list(const json& obj, const std::string& path, const char* key) {
  std::vector<UpdateAction> out;
  const json& arr = require_array(obj, path, key, false);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = index_path(child_path(path, key), i);
    require_object(arr[i], p);
    std::string op = require_string(arr[i], p, "op");
    if (op == "match") schema_error(p, "match actions cannot be nested");
    out.push_back(read_update(arr[i], p, op));
  }
  return out;
}

Action read_action(const json& j, const std::string& path) {
  require_object(j, path);
  std::string op = require_string(j, path, "op");
  if (op != "match") return read_update(j, path, op);
  allow_keys(j, path, {"op", "target_type", "target_filter", "self_actions", "target_actions"});
  MatchAction m;
  m.target_type = require_name(j, path, "target_type");
  m.target_filter = j.contains("target_filter")
                        ? read_expression(j["target_filter"], child_path(path, "target_filter"))
                        : parse_expression("true");
  m.self_actions = read_update_list(j, path, "self_actions");
  m.target_actions = read_update_list(j, path, "target_actions");
  return m;
}

BehaviourDef read_behaviour(const json& j, const std::string& path) {
  require_object(j, path);
  allow_keys(j, path, {"name", "actions"});
  BehaviourDef b;
  b.name = require_name(j, path, "name");
  if (b.name.find_first_of("<>&\"") != std::string::npos) {
    schema_error(child_path(path, "name"), "behaviour names may not contain markup characters");
  }
  const json& actions = require_array(j, path, "actions", false);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    b.actions.push_back(read_action(actions[i], index_path(child_path(path, "actions"), i)));
  }
  return b;
}

AgentTypeDelta read_delta(const json& j, const std::string& path) {
  require_object(j, path);
  allow_keys(j, path, {"name", "creates_type", "state_vars", "behaviours"});
  AgentTypeDelta d;
  d.name = require_name(j, path, "name");
  if (!is_type_name(d.name)) schema_error(child_path(path, "name"), "'" + d.name + "' is not a valid agent type name");
  const json& creates = require_field(j, path, "creates_type");
  if (!creates.is_boolean()) schema_error(child_path(path, "creates_type"), "expected a boolean");
  d.creates_type = creates.get<bool>();

  std::set<std::string> seen;
  const json& vars = require_array(j, path, "state_vars", false);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string p = index_path(child_path(path, "state_vars"), i);
    d.state_vars.push_back(read_var(vars[i], p));
    if (!seen.insert(d.state_vars.back().name).second) {
      schema_error(p, "variable '" + d.state_vars.back().name + "' declared twice");
    }
  }
  seen.clear();
  const json& behaviours = require_array(j, path, "behaviours", false);
  for (std::size_t i = 0; i < behaviours.size(); ++i) {
    const std::string p = index_path(child_path(path, "behaviours"), i);
    d.behaviours.push_back(read_behaviour(behaviours[i], p));
    if (!seen.insert(d.behaviours.back().name).second) {
      schema_error(p, "behaviour '" + d.behaviours.back().name + "' declared twice");
    }
  }
  return d;
}

json var_to_json(const VarDecl& v) {
  json j = {{"name", v.name}, {"kind", to_string(v.kind)}, {"init", v.init.source()}};
  if (v.range) j["range"] = {v.range->lo, v.range->hi};
  return j;
}

json update_to_json(const UpdateAction& a) {
  return {{"op", to_string(a.op)}, {"variable", a.variable}, {"value", a.operand.source()}};
}

}  // namespace

FacetManifest parse_manifest(const json& doc) {
  const std::string root;
  require_object(doc, root);
  allow_keys(doc, root, {"name", "depends_on", "agent_types", "model_vars", "description"});
  FacetManifest m;
  m.name = require_name(doc, root, "name");
  if (!is_type_name(m.name)) schema_error("name", "'" + m.name + "' is not a valid facet name");
  const json& deps = require_array(doc, root, "depends_on", false);
  for (std::size_t i = 0; i < deps.size(); ++i) {
    if (!deps[i].is_string()) schema_error(index_path("depends_on", i), "expected a facet name");
    m.depends_on.push_back(deps[i].get<std::string>());
  }
  std::set<std::string> seen;
  const json& types = require_array(doc, root, "agent_types", false);
  for (std::size_t i = 0; i < types.size(); ++i) {
    const std::string p = index_path("agent_types", i);
    m.agent_types.push_back(read_delta(types[i], p));
    if (!seen.insert(m.agent_types.back().name).second) {
      schema_error(p, "agent type '" + m.agent_types.back().name + "' appears twice");
    }
  }
  seen.clear();
  const json& vars = require_array(doc, root, "model_vars", false);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string p = index_path("model_vars", i);
    m.model_vars.push_back(read_var(vars[i], p));
    if (!seen.insert(m.model_vars.back().name).second) {
      schema_error(p, "model variable '" + m.model_vars.back().name + "' declared twice");
    }
  }
  return m;
}

FacetManifest parse_manifest(std::string_view document) {
  return parse_manifest(parse_json_text(document));
}

json manifest_to_json(const FacetManifest& m) {
  json types = json::array();
  for (const auto& d : m.agent_types) {
    json vars = json::array();
    for (const auto& v : d.state_vars) vars.push_back(var_to_json(v));
    json behaviours = json::array();
    for (const auto& b : d.behaviours) {
      json actions = json::array();
      for (const auto& a : b.actions) {
        if (const auto* u = std::get_if<UpdateAction>(&a)) {
          actions.push_back(update_to_json(*u));
        } else {
          const auto& mt = std::get<MatchAction>(a);
          json self = json::array();
          json target = json::array();
          for (const auto& s : mt.self_actions) self.push_back(update_to_json(s));
          for (const auto& t : mt.target_actions) target.push_back(update_to_json(t));
          actions.push_back({{"op", "match"},
                             {"target_type", mt.target_type},
                             {"target_filter", mt.target_filter.source()},
                             {"self_actions", self},
                             {"target_actions", target}});
        }
      }
      behaviours.push_back({{"name", b.name}, {"actions", actions}});
    }
    types.push_back(
        {{"name", d.name}, {"creates_type", d.creates_type}, {"state_vars", vars}, {"behaviours", behaviours}});
  }
  json model_vars = json::array();
  for (const auto& v : m.model_vars) model_vars.push_back(var_to_json(v));
  return {{"name", m.name}, {"depends_on", m.depends_on}, {"agent_types", types}, {"model_vars", model_vars}};
}

// ---------------------------------------------------------------------------
// Composite model

const VarDecl* AgentTypeSpec::find_var(std::string_view var) const {
  for (const auto& v : vars) {
    if (v.name == var) return &v;
  }
  return nullptr;
}

const BehaviourDef* AgentTypeSpec::find_behaviour(std::string_view behaviour) const {
  for (const auto& b : behaviours) {
    if (b.name == behaviour) return &b;
  }
  return nullptr;
}

KindMap AgentTypeSpec::var_kinds() const {
  KindMap out;
  for (const auto& v : vars) out.emplace(v.name, v.kind);
  return out;
}

const AgentTypeSpec* CompositeModel::find_type(std::string_view type) const {
  for (const auto& t : agent_types) {
    if (t.name == type) return &t;
  }
  return nullptr;
}

const VarDecl* CompositeModel::find_model_var(std::string_view var) const {
  for (const auto& v : model_vars) {
    if (v.name == var) return &v;
  }
  return nullptr;
}

KindMap CompositeModel::model_var_kinds() const {
  KindMap out;
  for (const auto& v : model_vars) out.emplace(v.name, v.kind);
  return out;
}

CompositeModel base_model() {
  CompositeModel m;
  m.model_vars.push_back({"tick", ValueKind::Number, parse_expression("0"), std::nullopt});
  m.provenance["model_var:tick"] = "base";
  return m;
}

bool structurally_equal(const CompositeModel& a, const CompositeModel& b) {
  if (a.provenance != b.provenance) return false;
  if (a.agent_types.size() != b.agent_types.size() || a.model_vars.size() != b.model_vars.size()) return false;
  for (const auto& v : a.model_vars) {
    const VarDecl* other = b.find_model_var(v.name);
    if (!other || !(*other == v)) return false;
  }
  for (const auto& t : a.agent_types) {
    const AgentTypeSpec* u = b.find_type(t.name);
    if (!u || u->vars.size() != t.vars.size() || u->behaviours.size() != t.behaviours.size()) return false;
    for (const auto& v : t.vars) {
      const VarDecl* other = u->find_var(v.name);
      if (!other || !(*other == v)) return false;
    }
    for (const auto& beh : t.behaviours) {
      const BehaviourDef* other = u->find_behaviour(beh.name);
      if (!other || !(*other == beh)) return false;
    }
  }
  return true;
}

std::vector<std::string> resolve_dependencies(const std::vector<std::string>& selected,
                                              const std::map<std::string, FacetManifest>& available) {
  ValidationReport report;
  std::set<std::string> chosen;
  std::vector<std::string> order_in;
  for (const auto& name : selected) {
    if (!available.count(name)) {
      report.error("UNKNOWN_FACET", name, "facet '" + name + "' is not available", {name});
      continue;
    }
    if (!chosen.insert(name).second) {
      report.error("DUPLICATE_FACET", name, "facet '" + name + "' is selected twice", {name});
      continue;
    }
    order_in.push_back(name);
  }
  for (const auto& name : order_in) {
    std::vector<std::string> missing;
    for (const auto& dep : available.at(name).depends_on) {
      if (!chosen.count(dep) && std::find(missing.begin(), missing.end(), dep) == missing.end()) {
        missing.push_back(dep);
      }
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      report.error("MISSING_DEPENDENCY", name, "facet '" + name + "' requires facets not selected: " + list,
                   missing);
    }
  }
  if (!report.ok()) throw ValidationFailed(std::move(report));

  std::vector<std::string> out;
  std::set<std::string> placed;
  std::vector<std::string> pending = order_in;
  while (!pending.empty()) {
    auto ready = std::find_if(pending.begin(), pending.end(), [&](const std::string& name) {
      const auto& deps = available.at(name).depends_on;
      return std::all_of(deps.begin(), deps.end(), [&](const std::string& d) { return placed.count(d) > 0; });
    });
    if (ready == pending.end()) {
      std::string list;
      for (const auto& p : pending) list += (list.empty() ? "" : ", ") + p;
      report.error("CYCLIC_DEPENDENCY", pending.front(), "facet dependencies form a cycle among: " + list, pending);
      throw ValidationFailed(std::move(report));
    }
    placed.insert(*ready);
    out.push_back(*ready);
    pending.erase(ready);
  }
  return out;
}

namespace {

std::set<std::string> dependency_closure(const std::string& facet,
                                         const std::map<std::string, const FacetManifest*>& by_name) {
  std::set<std::string> out{facet, "base"};
  std::vector<std::string> todo{facet};
  while (!todo.empty()) {
    std::string f = todo.back();
    todo.pop_back();
    auto it = by_name.find(f);
    if (it == by_name.end()) continue;
    for (const auto& d : it->second->depends_on) {
      if (out.insert(d).second) todo.push_back(d);
    }
  }
  return out;
}

// Checks one initializer: references must be visible to `owner` facet.
void check_init(const VarDecl& v, const std::string& where, const KindMap& agent_visible, const KindMap& model_visible, const KindMap& agent_all,
                const KindMap& model_all, bool agent_scope_allowed, ValidationReport& report) {
  bool bad = false;
  for (const auto& ref : free_variables(v.init)) {
    const bool is_agent = ref.rfind("agent.", 0) == 0;
    const std::string name = ref.substr(6);
    if (is_agent && !agent_scope_allowed) {
      report.error("INVALID_INIT_REFERENCE", where, "model variable initializers cannot read " + ref, {ref});
      bad = true;
      continue;
    }
    const KindMap& visible = is_agent ? agent_visible : model_visible;
    const KindMap& all = is_agent ? agent_all : model_all;
    if (!visible.count(name)) {
      std::string why = all.count(name) ? " (declared later or by a facet this one does not depend on)" : "";
      report.error("INVALID_INIT_REFERENCE", where, "initializer '" + v.init.source() + "' reads " + ref + why,
                   {ref});
      bad = true;
    }
  }
  if (bad) return;
  try {
    ValueKind got = type_check(v.init, TypeEnv{&agent_visible, &model_visible});
    if (got != v.kind) {
      report.error("TYPE_MISMATCH", where,
                   "initializer '" + v.init.source() + "' is " + std::string(to_string(got)) + " but '" + v.name +
                       "' is " + std::string(to_string(v.kind)));
    }
  } catch (const Error& e) {
    report.error(e.code(), where, e.what());
  }
}

}  // namespace

CompositeModel compose(const CompositeModel& base, const std::vector<FacetManifest>& facets) {
  CompositeModel out = base;
  ValidationReport report;

  std::map<std::string, const FacetManifest*> by_name;
  for (const auto& f : facets) by_name[f.name] = &f;

  for (const auto& facet : facets) {
    for (const auto& v : facet.model_vars) {
      const std::string key = "model_var:" + v.name;
      if (auto it = out.provenance.find(key); it != out.provenance.end()) {
        report.error("DUPLICATE_VAR", "model." + v.name,
                     "model variable '" + v.name + "' is declared by both " + it->second + " and " + facet.name,
                     {it->second, facet.name});
        continue;
      }
      out.provenance[key] = facet.name;
      out.model_vars.push_back(v);
    }

    for (const auto& delta : facet.agent_types) {
      const std::string type_key = "type:" + delta.name;
      AgentTypeSpec* type = nullptr;
      for (auto& t : out.agent_types) {
        if (t.name == delta.name) type = &t;
      }
      if (delta.creates_type) {
        if (type) {
          report.error("DUPLICATE_TYPE", delta.name,
                       "agent type '" + delta.name + "' is created by both " + out.provenance[type_key] + " and " +
                           facet.name,
                       {out.provenance[type_key], facet.name});
          continue;
        }
        out.agent_types.push_back({delta.name, {}, {}});
        out.provenance[type_key] = facet.name;
        type = &out.agent_types.back();
      } else if (!type) {
        std::vector<std::string> subjects{facet.name};
        std::string hint;
        for (const auto& other : facets) {
          for (const auto& od : other.agent_types) {
            if (od.creates_type && od.name == delta.name && other.name != facet.name) {
              subjects.push_back(other.name);
              hint = " (" + other.name + " creates it but is applied later)";
            }
          }
        }
        report.error("EXTENDS_UNKNOWN_TYPE", delta.name,
                     facet.name + " extends agent type '" + delta.name + "' which no earlier facet creates" + hint,
                     subjects);
        continue;
      }

      for (const auto& v : delta.state_vars) {
        const std::string key = "var:" + delta.name + "." + v.name;
        if (auto it = out.provenance.find(key); it != out.provenance.end()) {
          report.error("DUPLICATE_VAR", delta.name + "." + v.name,
                       "variable " + delta.name + "." + v.name + " is declared by both " + it->second + " and " +
                           facet.name,
                       {it->second, facet.name});
          continue;
        }
        out.provenance[key] = facet.name;
        type->vars.push_back(v);
      }
      for (const auto& b : delta.behaviours) {
        const std::string key = "behaviour:" + delta.name + "." + b.name;
        if (auto it = out.provenance.find(key); it != out.provenance.end()) {
          report.error("DUPLICATE_BEHAVIOUR", delta.name + "." + b.name,
                       "behaviour " + delta.name + "." + b.name + " is declared by both " + it->second + " and " +
                           facet.name,
                       {it->second, facet.name});
          continue;
        }
        out.provenance[key] = facet.name;
        type->behaviours.push_back(b);
      }
    }
    out.facets.push_back(facet.name);
  }
  if (!report.ok()) throw ValidationFailed(std::move(report));

  // Initializer visibility. Model variables are initialized before any
  // agent, so agent initializers may read every model variable.
  const KindMap model_all = out.model_var_kinds();
  KindMap model_so_far;
  for (const auto& v : out.model_vars) {
    const std::string& owner = out.provenance["model_var:" + v.name];
    auto allowed = dependency_closure(owner, by_name);
    KindMap visible;
    for (const auto& [name, kind] : model_so_far) {
      if (allowed.count(out.provenance["model_var:" + name])) visible.emplace(name, kind);
    }
    check_init(v, "model." + v.name + ".init", {}, visible, {}, model_all, false, report);
    model_so_far.emplace(v.name, v.kind);
  }
  for (const auto& type : out.agent_types) {
    const KindMap agent_all = type.var_kinds();
    for (std::size_t i = 0; i < type.vars.size(); ++i) {
      const VarDecl& v = type.vars[i];
      const std::string& owner = out.provenance["var:" + type.name + "." + v.name];
      auto allowed = dependency_closure(owner, by_name);
      KindMap visible;
      for (std::size_t j = 0; j < i; ++j) {
        if (allowed.count(out.provenance["var:" + type.name + "." + type.vars[j].name])) {
          visible.emplace(type.vars[j].name, type.vars[j].kind);
        }
      }
      check_init(v, type.name + "." + v.name + ".init", visible, model_all, agent_all, model_all, true,
                 report);
    }
  }
  if (!report.ok()) throw ValidationFailed(std::move(report));
  return out;
}

// ---------------------------------------------------------------------------
// Behaviour checks

namespace {

void check_update(const UpdateAction& a, const AgentTypeSpec& owner, const KindMap& model_kinds,
                  const std::string& where, ValidationReport& report) {
  const VarDecl* var = owner.find_var(a.variable);
  if (!var) {
    report.error("UNKNOWN_VARIABLE", where, owner.name + " has no variable '" + a.variable + "'", {a.variable});
    return;
  }
  const KindMap agent_kinds = owner.var_kinds();
  ValueKind got;
  try {
    got = type_check(a.operand, TypeEnv{&agent_kinds, &model_kinds});
  } catch (const Error& e) {
    report.error(e.code(), where, std::string(e.what()) + " in '" + a.operand.source() + "'");
    return;
  }
  if (a.op == ActionOp::Set) {
    if (got != var->kind) {
      report.error("TYPE_MISMATCH", where,
                   "cannot set " + std::string(to_string(var->kind)) + " variable '" + a.variable + "' to a " +
                       std::string(to_string(got)));
    }
  } else if (var->kind != ValueKind::Number || got != ValueKind::Number) {
    report.error("TYPE_MISMATCH", where,
                 std::string(to_string(a.op)) + " needs a number variable and operand ('" + a.variable + "' is " +
                     std::string(to_string(var->kind)) + ", operand is " + std::string(to_string(got)) + ")");
  }
}

}  // namespace

ValidationReport check_composite(const CompositeModel& model) {
  ValidationReport report;
  const KindMap model_kinds = model.model_var_kinds();
  for (const auto& type : model.agent_types) {
    for (const auto& b : type.behaviours) {
      for (std::size_t i = 0; i < b.actions.size(); ++i) {
        const std::string where = type.name + "." + b.name + ".actions[" + std::to_string(i) + "]";
        if (const auto* u = std::get_if<UpdateAction>(&b.actions[i])) {
          check_update(*u, type, model_kinds, where, report);
          continue;
        }
        const auto& m = std::get<MatchAction>(b.actions[i]);
        const AgentTypeSpec* target = model.find_type(m.target_type);
        if (!target) {
          report.error("UNKNOWN_TYPE", where, "match target type '" + m.target_type + "' is not in the model",
                       {m.target_type});
          continue;
        }
        const KindMap target_kinds = target->var_kinds();
        try {
          ValueKind k = type_check(m.target_filter, TypeEnv{&target_kinds, &model_kinds});
          if (k != ValueKind::Boolean) {
            report.error("TYPE_MISMATCH", where + ".target_filter", "target filter must be boolean");
          }
        } catch (const Error& e) {
          report.error(e.code(), where + ".target_filter",
                       std::string(e.what()) + " in '" + m.target_filter.source() + "'");
        }
        for (std::size_t k = 0; k < m.self_actions.size(); ++k) {
          check_update(m.self_actions[k], type, model_kinds, where + ".self_actions[" + std::to_string(k) + "]",
                       report);
        }
        for (std::size_t k = 0; k < m.target_actions.size(); ++k) {
          check_update(m.target_actions[k], *target, model_kinds,
                       where + ".target_actions[" + std::to_string(k) + "]", report);
        }
      }
    }
  }
  return report;
}

FlowSchema flow_schema(const CompositeModel& model, const AgentTypeSpec& type) {
  FlowSchema schema;
  schema.agent_type = type.name;
  for (const auto& b : type.behaviours) schema.behaviours.insert(b.name);
  schema.agent_vars = type.var_kinds();
  schema.model_vars = model.model_var_kinds();
  return schema;
}

std::string emit_skeleton_flow(const AgentTypeSpec& type) {
  std::vector<std::string> names;
  for (const auto& b : type.behaviours) names.push_back(b.name);
  return emit_skeleton_flow(type.name, names);
}

UpdateResult apply_update(ActionOp op, const Value& current, const Value& operand,
                          const std::optional<NumberRange>& range) {
  Value next;
  if (op == ActionOp::Set) {
    if (operand.kind() != current.kind()) {
      throw Error("TYPE_MISMATCH", "cannot set a " + std::string(to_string(current.kind())) + " variable to a " +
                                       std::string(to_string(operand.kind())));
    }
    next = operand;
  } else {
    if (!current.is_number() || !operand.is_number()) {
      throw Error("TYPE_MISMATCH", std::string(to_string(op)) + " needs numbers, got " +
                                       std::string(to_string(current.kind())) + " and " +
                                       std::string(to_string(operand.kind())));
    }
    double v = op == ActionOp::Add ? current.as_number() + operand.as_number()
                                   : current.as_number() * operand.as_number();
    if (!std::isfinite(v)) throw Error("NON_FINITE", "non-finite result from " + std::string(to_string(op)));
    next = v;
  }
  UpdateResult result{next, false};
  if (range && next.is_number()) {
    double v = next.as_number();
    double c = std::clamp(v, range->lo, range->hi);
    if (c != v) {
      result.value = c;
      result.clamped = true;
    }
  }
  return result;
}

}  // namespace facetsim
