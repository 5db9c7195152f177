#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "facetsim/agent.hpp"
#include "facetsim/facet.hpp"

namespace facetsim {

enum class PolicyMode { Once, Continuous };

std::string_view to_string(PolicyMode mode);

/// End-user intervention: every agent of `target_agent_type` whose
/// `condition` holds gets `action` applied. `Once` policies touch each agent
/// at most once per run; `Continuous` ones re-apply every tick (so a
/// multiply compounds).
struct Policy {
  std::string name;
  std::string target_agent_type;
  Expression condition;
  UpdateAction action;
  PolicyMode mode = PolicyMode::Once;

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Errors: SCHEMA_VIOLATION, UNKNOWN_OP, UNKNOWN_MODE, expression parse codes.
Policy parse_policy(std::string_view document);
Policy parse_policy(const nlohmann::json& document);
inline Policy parse_policy(const std::string& document) { return parse_policy(std::string_view(document)); }
inline Policy parse_policy(const char* document) { return parse_policy(std::string_view(document)); }
nlohmann::json policy_to_json(const Policy& policy);

/// UNKNOWN_TYPE, UNKNOWN_VARIABLE, UNBOUND_VARIABLE, TYPE_MISMATCH against
/// the composed model.
ValidationReport check_policy(const Policy& policy, const CompositeModel& model);

class PolicyApplicationLog {
 public:
  bool applied(std::size_t policy, AgentId agent) const { return applied_.count({policy, agent}) > 0; }
  void record(std::size_t policy, AgentId agent, std::int64_t tick);

  // Applications per policy during `tick` (zero when none).
  std::size_t count(std::size_t policy, std::int64_t tick) const;
  std::size_t total(std::size_t policy) const;

 private:
  std::set<std::pair<std::size_t, AgentId>> applied_;
  std::map<std::pair<std::size_t, std::int64_t>, std::size_t> per_tick_;
};

/// Agents of the target type whose condition holds, minus (for Once)
/// those already applied. Ascending id order.
std::vector<AgentId> applicable_agents(const Policy& policy, std::size_t policy_index,
                                       std::span<const AgentState> population, const VarMap& model_vars,
                                       const PolicyApplicationLog& log);

/// Computes the write for one agent; the operand sees the pre-application
/// state. Does not mutate the agent.
StateDelta apply_policy(const Policy& policy, const AgentState& agent, const VarMap& model_vars,
                        const CompositeModel& model);

}  // namespace facetsim
