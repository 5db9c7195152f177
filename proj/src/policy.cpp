#include "facetsim/policy.hpp"

#include <algorithm>

#include "json_util.hpp"

namespace facetsim {

using nlohmann::json;
using namespace detail;

std::string_view to_string(PolicyMode mode) {
  return mode == PolicyMode::Once ? "once" : "continuous";
}

Policy parse_policy(const json& doc) {
  const std::string root;
  require_object(doc, root);
  allow_keys(doc, root, {"name", "target_agent_type", "condition", "action", "mode", "description"});
  Policy p;
  p.name = require_name(doc, root, "name");
  p.target_agent_type = require_name(doc, root, "target_agent_type");
  p.condition = read_expression(require_field(doc, root, "condition"), "condition");

  const json& action = require_field(doc, root, "action");
  require_object(action, "action");
  allow_keys(action, "action", {"op", "variable", "operand"});
  std::string op = require_string(action, "action", "op");
  auto parsed_op = parse_action_op(op);
  if (!parsed_op) {
    throw Error("UNKNOWN_OP", "unknown policy op '" + op + "' (set, add, multiply)", "action.op");
  }
  p.action.op = *parsed_op;
  p.action.variable = require_name(action, "action", "variable");
  p.action.operand = read_expression(require_field(action, "action", "operand"), "action.operand");

  std::string mode = require_string(doc, root, "mode");
  if (mode == "once") {
    p.mode = PolicyMode::Once;
  } else if (mode == "continuous") {
    p.mode = PolicyMode::Continuous;
  } else {
    throw Error("UNKNOWN_MODE", "unknown policy mode '" + mode + "' (once, continuous)", "mode");
  }
  return p;
}

Policy parse_policy(std::string_view document) {
  return parse_policy(parse_json_text(document));
}

json policy_to_json(const Policy& p) {
  return {{"name", p.name},
          {"target_agent_type", p.target_agent_type},
          {"condition", p.condition.source()},
          {"action",
           {{"op", to_string(p.action.op)}, {"variable", p.action.variable}, {"operand", p.action.operand.source()}}},
          {"mode", to_string(p.mode)}};
}

ValidationReport check_policy(const Policy& p, const CompositeModel& model) {
  ValidationReport report;
  const AgentTypeSpec* type = model.find_type(p.target_agent_type);
  if (!type) {
    report.error("UNKNOWN_TYPE", p.name, "policy targets unknown agent type '" + p.target_agent_type + "'",
                 {p.target_agent_type});
    return report;
  }
  const KindMap agent_kinds = type->var_kinds();
  const KindMap model_kinds = model.model_var_kinds();
  const TypeEnv env{&agent_kinds, &model_kinds};

  auto unbound = [&](const Expression& e, const std::string& where) {
    bool any = false;
    for (const auto& ref : free_variables(e)) {
      const bool is_agent = ref.rfind("agent.", 0) == 0;
      const KindMap& kinds = is_agent ? agent_kinds : model_kinds;
      if (!kinds.count(ref.substr(6))) {
        report.error("UNBOUND_VARIABLE", where, "unknown variable " + ref + " in '" + e.source() + "'", {ref});
        any = true;
      }
    }
    return any;
  };

  if (!unbound(p.condition, p.name + ".condition")) {
    try {
      if (type_check(p.condition, env) != ValueKind::Boolean) {
        report.error("TYPE_MISMATCH", p.name + ".condition", "condition '" + p.condition.source() + "' is not boolean");
      }
    } catch (const Error& e) {
      report.error(e.code(), p.name + ".condition", e.what());
    }
  }

  const VarDecl* var = type->find_var(p.action.variable);
  if (!var) {
    report.error("UNKNOWN_VARIABLE", p.name + ".action",
                 type->name + " has no variable '" + p.action.variable + "'", {p.action.variable});
  }
  if (!unbound(p.action.operand, p.name + ".action.operand") && var) {
    try {
      ValueKind k = type_check(p.action.operand, env);
      bool ok = p.action.op == ActionOp::Set ? k == var->kind
                                             : (k == ValueKind::Number && var->kind == ValueKind::Number);
      if (!ok) {
        report.error("TYPE_MISMATCH", p.name + ".action",
                     std::string(to_string(p.action.op)) + " on " + std::string(to_string(var->kind)) +
                         " variable '" + var->name + "' with a " + std::string(to_string(k)) + " operand");
      }
    } catch (const Error& e) {
      report.error(e.code(), p.name + ".action.operand", e.what());
    }
  }
  return report;
}

void PolicyApplicationLog::record(std::size_t policy, AgentId agent, std::int64_t tick) {
  applied_.insert({policy, agent});
  ++per_tick_[{policy, tick}];
}

std::size_t PolicyApplicationLog::count(std::size_t policy, std::int64_t tick) const {
  auto it = per_tick_.find({policy, tick});
  return it == per_tick_.end() ? 0 : it->second;
}

std::size_t PolicyApplicationLog::total(std::size_t policy) const {
  std::size_t n = 0;
  for (const auto& [key, c] : per_tick_) {
    if (key.first == policy) n += c;
  }
  return n;
}

std::vector<AgentId> applicable_agents(const Policy& policy, std::size_t policy_index,
                                       std::span<const AgentState> population, const VarMap& model_vars,
                                       const PolicyApplicationLog& log) {
  std::vector<AgentId> out;
  for (const auto& agent : population) {
    if (agent.agent_type != policy.target_agent_type) continue;
    if (policy.mode == PolicyMode::Once && log.applied(policy_index, agent.id)) continue;
    Value v;
    try {
      v = evaluate(policy.condition, EvalContext{&agent.vars, &model_vars});
    } catch (const Error& e) {
      throw Error(e.code(), "policy '" + policy.name + "', agent " + std::to_string(agent.id) + ": " + e.what(),
                  policy.name + "@" + std::to_string(agent.id));
    }
    if (!v.is_bool()) {
      throw Error("TYPE_MISMATCH", "policy '" + policy.name + "' condition is not boolean",
                  policy.name + "@" + std::to_string(agent.id));
    }
    if (v.as_bool()) out.push_back(agent.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

StateDelta apply_policy(const Policy& policy, const AgentState& agent, const VarMap& model_vars,
                        const CompositeModel& model) {
  const std::string where = policy.name + "@" + std::to_string(agent.id);
  auto current = agent.vars.find(policy.action.variable);
  if (current == agent.vars.end()) {
    throw Error("UNKNOWN_VARIABLE", "agent has no variable '" + policy.action.variable + "'", where);
  }
  const AgentTypeSpec* type = model.find_type(agent.agent_type);
  const VarDecl* decl = type ? type->find_var(policy.action.variable) : nullptr;
  try {
    Value operand = evaluate(policy.action.operand, EvalContext{&agent.vars, &model_vars});
    UpdateResult r = apply_update(policy.action.op, current->second, operand,
                                  decl ? decl->range : std::optional<NumberRange>{});
    return StateDelta{agent.id, policy.action.variable, current->second, r.value, r.clamped};
  } catch (const Error& e) {
    throw Error(e.code(), "policy '" + policy.name + "', agent " + std::to_string(agent.id) + ": " + e.what(), where);
  }
}

}  // namespace facetsim
