#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "facetsim/agent.hpp"
#include "facetsim/facet.hpp"
#include "facetsim/flow.hpp"
#include "facetsim/metrics.hpp"
#include "facetsim/policy.hpp"
#include "facetsim/rng.hpp"

namespace facetsim {

/// Draw a number variable uniformly from its declared range after the
/// initializers ran (seeded initial heterogeneity).
struct RandomizedVar {
  std::string agent_type;
  std::string variable;

  friend bool operator==(const RandomizedVar&, const RandomizedVar&) = default;
};

/// Everything a run needs, fully resolved.
struct RunPlan {
  std::shared_ptr<const CompositeModel> model;
  std::map<std::string, BehaviourFlow> flows;  // agent type -> flow
  std::vector<Policy> policies;                // application order
  std::vector<MetricSpec> metrics;
  std::int64_t iterations = 1;
  std::int64_t collection_interval = 1;
  std::uint64_t seed = 0;
  std::map<std::string, std::int64_t> populations;
  VarMap model_var_overrides;
  std::vector<RandomizedVar> randomize;
};

/// Cross-artifact validation of a plan (flows, policies, metrics, globals,
/// populations) against its composed model.
ValidationReport check_plan(const RunPlan& plan);

struct ModelState {
  std::shared_ptr<const RunPlan> plan;
  std::int64_t tick = 0;
  std::vector<AgentState> agents;  // agents[i].id == i
  VarMap model_vars;
  Rng rng;
  PolicyApplicationLog policy_log;
  std::vector<std::string> warnings;
  std::set<std::string> warned;
  std::vector<MetricRow> rows;

  bool finished() const { return tick >= plan->iterations; }
  void warn_once(const std::string& key, const std::string& message);
};

/// Builds the population: model variables first (overrides replace their
/// initializer), then agents per type in composite order with ids 0..N-1,
/// then the randomized variables in listed order, ascending id.
/// Throws ValidationFailed when check_plan reports errors.
ModelState initialize_run(std::shared_ptr<const RunPlan> plan);
ModelState initialize_run(RunPlan plan);

struct AgentTrace {
  AgentId agent = 0;
  std::vector<std::string> executed;
};

struct TickReport {
  std::int64_t tick = 0;
  std::size_t policy_applications = 0;
  std::vector<AgentId> activation_order;
  std::vector<AgentTrace> traces;  // activation order
  std::optional<MetricRow> metrics;
};

/// One tick: policies (listed order, ascending id), activation permutation,
/// per-agent traversal, metric collection when due, tick += 1.
TickReport step(ModelState& state);

struct TraversalHooks {
  std::function<void(const FlowNode&)> execute;
  std::function<void(const FlowNode&, const TriggerResult&)> on_clamp;
};

/// Walks the flow from start until a leaf. A lone child is gated by one
/// uniform draw against its trigger; among several children one draw picks
/// a child proportionally to the triggers (edge order) and it always runs;
/// all-zero weights end the walk. Returns executed behaviour names.
std::vector<std::string> traverse(const BehaviourFlow& flow, const EvalContext& ctx, Rng& rng,
                                  const TraversalHooks& hooks);

/// Traverses `agent`'s flow inside a run, executing behaviours for real.
std::vector<std::string> traverse_agent(ModelState& state, AgentId agent);

/// Applies the behaviour's actions in order. Match picks one eligible target
/// uniformly (ascending-id candidate list, one draw); no candidate means no
/// effect. Errors: UNKNOWN_VARIABLE, TYPE_MISMATCH.
std::vector<StateDelta> execute_behaviour(const BehaviourDef& behaviour, AgentId agent, ModelState& state);

/// Opaque copy of the artifacts a run came from.
struct ScenarioSnapshot {
  std::string name;
  std::string document;
  std::map<std::string, std::string> files;  // workspace-relative path -> bytes

  friend bool operator==(const ScenarioSnapshot&, const ScenarioSnapshot&) = default;
};

struct RunResult {
  ScenarioSnapshot snapshot;
  std::uint64_t seed = 0;
  std::vector<std::string> metric_names;
  std::vector<MetricRow> rows;
  std::vector<std::string> warnings;

  std::string csv() const { return metrics_csv(metric_names, rows); }
  std::string warnings_log() const;
};

using TickObserver = std::function<void(const ModelState&, const TickReport&)>;

/// Initializes and steps to completion.
RunResult run_plan(std::shared_ptr<const RunPlan> plan, const TickObserver& observer = {});

}  // namespace facetsim
