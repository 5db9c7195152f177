#include "facetsim/sim.hpp"

#include <algorithm>
#include <numeric>

namespace facetsim {

ValidationReport check_plan(const RunPlan& plan) {
  ValidationReport report;
  if (!plan.model) {
    report.error("NO_MODEL", "", "run plan has no composed model");
    return report;
  }
  const CompositeModel& model = *plan.model;
  report.merge(check_composite(model), "model");

  if (plan.iterations < 1) report.error("BAD_GLOBAL", "iterations", "iterations must be at least 1");
  if (plan.collection_interval < 1) {
    report.error("BAD_GLOBAL", "data_collection_interval", "data collection interval must be at least 1");
  }

  for (const auto& type : model.agent_types) {
    auto flow = plan.flows.find(type.name);
    if (flow == plan.flows.end()) {
      report.error("MISSING_FLOW", type.name, "agent type '" + type.name + "' has no BehaviourFlow bound",
                   {type.name});
    } else {
      report.merge(validate_flow(flow->second, flow_schema(model, type)), "flow:" + type.name);
    }
    auto pop = plan.populations.find(type.name);
    if (pop == plan.populations.end()) {
      report.error("MISSING_POPULATION", type.name, "no population count for agent type '" + type.name + "'",
                   {type.name});
    } else if (pop->second < 0) {
      report.error("BAD_POPULATION", type.name, "population counts must be >= 0");
    }
  }
  for (const auto& [type, _] : plan.flows) {
    if (!model.find_type(type)) report.error("UNKNOWN_TYPE", "flow:" + type, "flow bound to unknown agent type", {type});
  }
  for (const auto& [type, _] : plan.populations) {
    if (!model.find_type(type)) {
      report.error("UNKNOWN_TYPE", "population:" + type, "population for unknown agent type", {type});
    }
  }

  std::set<std::string> names;
  for (const auto& p : plan.policies) {
    if (!names.insert(p.name).second) report.error("DUPLICATE_POLICY", p.name, "policy listed twice");
    report.merge(check_policy(p, model), "policy");
  }
  names.clear();
  for (const auto& m : plan.metrics) {
    if (!names.insert(m.name).second) report.error("DUPLICATE_METRIC", m.name, "metric name used twice");
    report.merge(check_metric(m, model), "metric");
  }

  for (const auto& [name, value] : plan.model_var_overrides) {
    const VarDecl* decl = model.find_model_var(name);
    if (name == "tick") {
      report.error("BAD_OVERRIDE", name, "model.tick is maintained by the engine");
    } else if (!decl) {
      report.error("UNKNOWN_VARIABLE", "override:" + name, "no model variable '" + name + "'", {name});
    } else if (decl->kind != value.kind()) {
      report.error("TYPE_MISMATCH", "override:" + name,
                   "override for " + std::string(to_string(decl->kind)) + " variable is a " +
                       std::string(to_string(value.kind())));
    }
  }
  for (const auto& r : plan.randomize) {
    const AgentTypeSpec* type = model.find_type(r.agent_type);
    const VarDecl* v = type ? type->find_var(r.variable) : nullptr;
    if (!v) {
      report.error("UNKNOWN_VARIABLE", "randomize:" + r.agent_type + "." + r.variable, "no such agent variable");
    } else if (v->kind != ValueKind::Number || !v->range) {
      report.error("RANDOMIZE_NEEDS_RANGE", "randomize:" + r.agent_type + "." + r.variable,
                   "only number variables with a declared range can be randomized");
    }
  }
  return report;
}

void ModelState::warn_once(const std::string& key, const std::string& message) {
  if (warned.insert(key).second) warnings.push_back(message);
}

namespace {

Value clamp_init(ModelState& s, const VarDecl& decl, Value v, const std::string& where) {
  if (v.kind() != decl.kind) {
    throw Error("TYPE_MISMATCH", "initializer of " + where + " produced a " + std::string(to_string(v.kind())), where);
  }
  if (decl.range && v.is_number()) {
    double x = v.as_number();
    double c = std::clamp(x, decl.range->lo, decl.range->hi);
    if (c != x) {
      s.warn_once("init:" + where, "initial value of " + where + " clamped into [" + format_number(decl.range->lo) +
                                       ", " + format_number(decl.range->hi) + "]");
      return c;
    }
  }
  return v;
}

}  // namespace

ModelState initialize_run(std::shared_ptr<const RunPlan> plan) {
  ValidationReport report = check_plan(*plan);
  if (!report.ok()) throw ValidationFailed(std::move(report));

  ModelState s;
  s.plan = plan;
  s.rng = Rng(plan->seed);
  const CompositeModel& model = *plan->model;

  for (const auto& decl : model.model_vars) {
    if (decl.name == "tick") {
      s.model_vars["tick"] = 0;
      continue;
    }
    if (auto o = plan->model_var_overrides.find(decl.name); o != plan->model_var_overrides.end()) {
      s.model_vars[decl.name] = clamp_init(s, decl, o->second, "model." + decl.name);
      continue;
    }
    Value v = evaluate(decl.init, EvalContext{nullptr, &s.model_vars});
    s.model_vars[decl.name] = clamp_init(s, decl, std::move(v), "model." + decl.name);
  }

  for (const auto& type : model.agent_types) {
    const std::int64_t count = plan->populations.at(type.name);
    for (std::int64_t i = 0; i < count; ++i) {
      AgentState agent;
      agent.id = static_cast<AgentId>(s.agents.size());
      agent.agent_type = type.name;
      for (const auto& decl : type.vars) {
        const std::string where = type.name + "." + decl.name;
        Value v;
        try {
          v = evaluate(decl.init, EvalContext{&agent.vars, &s.model_vars});
        } catch (const Error& e) {
          throw Error(e.code(), "initializing " + where + " for agent " + std::to_string(agent.id) + ": " + e.what(),
                      where);
        }
        agent.vars[decl.name] = clamp_init(s, decl, std::move(v), where);
      }
      s.agents.push_back(std::move(agent));
    }
  }

  for (const auto& r : plan->randomize) {
    const NumberRange range = *model.find_type(r.agent_type)->find_var(r.variable)->range;
    for (auto& agent : s.agents) {
      if (agent.agent_type != r.agent_type) continue;
      agent.vars[r.variable] = range.lo + (range.hi - range.lo) * s.rng.uniform();
    }
  }
  return s;
}

ModelState initialize_run(RunPlan plan) {
  return initialize_run(std::make_shared<const RunPlan>(std::move(plan)));
}

// ---------------------------------------------------------------------------
// Traversal

std::vector<std::string> traverse(const BehaviourFlow& flow, const EvalContext& ctx, Rng& rng,
                                  const TraversalHooks& hooks) {
  auto start = flow.start();
  if (!start) throw Error("NO_START", "flow has no unique start node");
  const auto& nodes = flow.nodes();

  auto trigger_of = [&](std::size_t i) {
    TriggerResult r;
    try {
      r = evaluate_trigger(nodes[i].trigger, ctx);
    } catch (const Error& e) {
      throw Error(e.code(), "node '" + nodes[i].id + "': " + e.what(), nodes[i].id);
    }
    if (r.clamped && hooks.on_clamp) hooks.on_clamp(nodes[i], r);
    return r.probability;
  };
  auto run = [&](std::size_t i, std::vector<std::string>& executed) {
    executed.push_back(*nodes[i].behaviour);
    if (hooks.execute) {
      try {
        hooks.execute(nodes[i]);
      } catch (const Error& e) {
        throw Error(e.code(), "node '" + nodes[i].id + "': " + e.what(), nodes[i].id);
      }
    }
  };

  std::vector<std::string> executed;
  std::size_t cursor = *start;
  std::vector<double> weights;
  for (std::size_t guard = 0; guard <= nodes.size(); ++guard) {
    auto kids = flow.children(cursor);
    if (kids.empty()) return executed;
    if (kids.size() == 1) {
      const std::size_t child = kids.front();
      const double p = trigger_of(child);
      if (rng.uniform() < p) run(child, executed);
      cursor = child;
      continue;
    }
    weights.clear();
    double total = 0.0;
    for (std::size_t k : kids) {
      weights.push_back(trigger_of(k));
      total += weights.back();
    }
    if (total <= 0.0) return executed;
    const double target = rng.uniform() * total;
    std::size_t pick = kids.size();
    double cumulative = 0.0;
    for (std::size_t k = 0; k < kids.size(); ++k) {
      cumulative += weights[k];
      if (target < cumulative) {
        pick = k;
        break;
      }
    }
    if (pick == kids.size()) {
      // Rounding left target == total; take the last child with weight.
      for (std::size_t k = kids.size(); k-- > 0;) {
        if (weights[k] > 0.0) {
          pick = k;
          break;
        }
      }
    }
    run(kids[pick], executed);
    cursor = kids[pick];
  }
  throw Error("CYCLE", "traversal did not reach a leaf; the flow contains a cycle");
}

namespace {

const AgentTypeSpec& type_of(const ModelState& s, const AgentState& agent) {
  const AgentTypeSpec* t = s.plan->model->find_type(agent.agent_type);
  if (!t) throw Error("UNKNOWN_TYPE", "agent type '" + agent.agent_type + "' is not in the model");
  return *t;
}

StateDelta apply_action(const UpdateAction& a, AgentState& agent, const AgentTypeSpec& type, ModelState& s) {
  auto it = agent.vars.find(a.variable);
  const VarDecl* decl = type.find_var(a.variable);
  if (it == agent.vars.end() || !decl) {
    throw Error("UNKNOWN_VARIABLE", type.name + " has no variable '" + a.variable + "'", a.variable);
  }
  Value operand = evaluate(a.operand, EvalContext{&agent.vars, &s.model_vars});
  UpdateResult r = apply_update(a.op, it->second, operand, decl->range);
  StateDelta delta{agent.id, a.variable, it->second, r.value, r.clamped};
  it->second = r.value;
  if (r.clamped) {
    s.warn_once("clamp:" + type.name + "." + a.variable,
                type.name + "." + a.variable + " clamped into its declared range by a behaviour (first at tick " +
                    std::to_string(s.tick) + ", agent " + std::to_string(agent.id) + ")");
  }
  return delta;
}

}  // namespace

std::vector<StateDelta> execute_behaviour(const BehaviourDef& behaviour, AgentId id, ModelState& s) {
  std::vector<StateDelta> effects;
  AgentState& self = s.agents.at(static_cast<std::size_t>(id));
  const AgentTypeSpec& self_type = type_of(s, self);
  for (const auto& action : behaviour.actions) {
    if (const auto* u = std::get_if<UpdateAction>(&action)) {
      effects.push_back(apply_action(*u, self, self_type, s));
      continue;
    }
    const auto& m = std::get<MatchAction>(action);
    std::vector<AgentId> eligible;
    for (const auto& candidate : s.agents) {
      if (candidate.id == id || candidate.agent_type != m.target_type) continue;
      Value ok = evaluate(m.target_filter, EvalContext{&candidate.vars, &s.model_vars});
      if (!ok.is_bool()) throw Error("TYPE_MISMATCH", "match filter is not boolean");
      if (ok.as_bool()) eligible.push_back(candidate.id);
    }
    if (eligible.empty()) continue;
    AgentState& target = s.agents[static_cast<std::size_t>(eligible[s.rng.index(eligible.size())])];
    const AgentTypeSpec& target_type = type_of(s, target);
    for (const auto& a : m.self_actions) effects.push_back(apply_action(a, self, self_type, s));
    for (const auto& a : m.target_actions) effects.push_back(apply_action(a, target, target_type, s));
  }
  return effects;
}

std::vector<std::string> traverse_agent(ModelState& s, AgentId id) {
  AgentState& agent = s.agents.at(static_cast<std::size_t>(id));
  const AgentTypeSpec& type = type_of(s, agent);
  const BehaviourFlow& flow = s.plan->flows.at(agent.agent_type);
  TraversalHooks hooks;
  hooks.execute = [&](const FlowNode& node) {
    const BehaviourDef* b = type.find_behaviour(*node.behaviour);
    if (!b) throw Error("UNKNOWN_BEHAVIOUR", type.name + " has no behaviour '" + *node.behaviour + "'");
    execute_behaviour(*b, id, s);
  };
  hooks.on_clamp = [&](const FlowNode& node, const TriggerResult& r) {
    s.warn_once("trigger:" + type.name + ":" + node.id,
                "trigger of node '" + node.id + "' (" + type.name + ") evaluated to " + format_number(r.raw) +
                    " and was clamped into [0, 1] (first at tick " + std::to_string(s.tick) + ", agent " +
                    std::to_string(id) + ")");
  };
  return traverse(flow, EvalContext{&agent.vars, &s.model_vars}, s.rng, hooks);
}

TickReport step(ModelState& s) {
  if (s.finished()) throw Error("RUN_FINISHED", "all iterations have already run");
  const RunPlan& plan = *s.plan;
  TickReport report;
  report.tick = s.tick;
  s.model_vars["tick"] = s.tick;

  for (std::size_t i = 0; i < plan.policies.size(); ++i) {
    const Policy& policy = plan.policies[i];
    try {
      for (AgentId id : applicable_agents(policy, i, s.agents, s.model_vars, s.policy_log)) {
        AgentState& agent = s.agents[static_cast<std::size_t>(id)];
        StateDelta d = apply_policy(policy, agent, s.model_vars, *plan.model);
        agent.vars[d.variable] = d.after;
        s.policy_log.record(i, id, s.tick);
        ++report.policy_applications;
        if (d.clamped) {
          s.warn_once("policy-clamp:" + policy.name,
                      "policy '" + policy.name + "' result clamped into the range of " + agent.agent_type + "." +
                          d.variable + " (first at tick " + std::to_string(s.tick) + ", agent " +
                          std::to_string(id) + ")");
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), "tick " + std::to_string(s.tick) + ": " + e.what(),
                  "tick=" + std::to_string(s.tick) + " " + e.location());
    }
  }

  report.activation_order.resize(s.agents.size());
  std::iota(report.activation_order.begin(), report.activation_order.end(), AgentId{0});
  for (std::size_t i = report.activation_order.size(); i > 1; --i) {
    std::swap(report.activation_order[i - 1], report.activation_order[s.rng.index(i)]);
  }

  report.traces.reserve(s.agents.size());
  for (AgentId id : report.activation_order) {
    try {
      report.traces.push_back({id, traverse_agent(s, id)});
    } catch (const Error& e) {
      throw Error(e.code(), "tick " + std::to_string(s.tick) + ", agent " + std::to_string(id) + ", " + e.what(),
                  "tick=" + std::to_string(s.tick) + " agent=" + std::to_string(id) + " node=" + e.location());
    }
  }

  if (s.tick % plan.collection_interval == 0 || s.tick == plan.iterations - 1) {
    report.metrics = collect_metrics(plan.metrics, s.agents, s.model_vars, s.tick);
    s.rows.push_back(*report.metrics);
  }
  ++s.tick;
  return report;
}

std::string RunResult::warnings_log() const {
  std::string out;
  for (const auto& w : warnings) out += w + "\n";
  return out;
}

RunResult run_plan(std::shared_ptr<const RunPlan> plan, const TickObserver& observer) {
  ModelState s = initialize_run(plan);
  while (!s.finished()) {
    TickReport r = step(s);
    if (observer) observer(s, r);
  }
  RunResult result;
  result.seed = plan->seed;
  for (const auto& m : plan->metrics) result.metric_names.push_back(m.name);
  result.rows = std::move(s.rows);
  result.warnings = std::move(s.warnings);
  return result;
}

}  // namespace facetsim
