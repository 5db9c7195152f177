#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facetsim/error.hpp"
#include "facetsim/expr.hpp"

namespace facetsim {

/// One trigger rule: when every criterion holds, `value` is the trigger.
struct TriggerRule {
  std::vector<Expression> when;
  Expression value;

  friend bool operator==(const TriggerRule&, const TriggerRule&) = default;
};

/// Ordered rules plus a default. An empty rule list is a constant trigger.
struct TriggerSpec {
  std::vector<TriggerRule> rules;
  Expression default_value;

  static TriggerSpec constant(double p);

  friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

/// Trigger JSON: {"rules":[{"when":[expr...],"value":expr}...],"default":expr}.
/// Errors: TRIGGER_MALFORMED, or the expression parse code.
TriggerSpec parse_trigger_json(std::string_view text);
std::string trigger_to_json(const TriggerSpec& spec);

struct TriggerResult {
  double probability = 0.0;
  double raw = 0.0;
  bool clamped = false;
};

/// First rule whose criteria all hold wins; otherwise the default. The result
/// is clamped into [0, 1].
TriggerResult evaluate_trigger(const TriggerSpec& spec, const EvalContext& ctx);

struct FlowNode {
  std::string id;
  std::optional<std::string> behaviour;  // absent only on the start node
  TriggerSpec trigger;

  bool is_start() const { return !behaviour.has_value(); }
  friend bool operator==(const FlowNode&, const FlowNode&) = default;
};

struct FlowEdge {
  std::string source;
  std::string target;

  friend bool operator==(const FlowEdge&, const FlowEdge&) = default;
};

/// Per-agent-type decision graph. Immutable once constructed; child lists
/// keep document edge order.
class BehaviourFlow {
 public:
  BehaviourFlow() = default;
  // Throws DUPLICATE_NODE_ID / UNKNOWN_NODE.
  BehaviourFlow(std::string agent_type, std::vector<FlowNode> nodes, std::vector<FlowEdge> edges);

  const std::string& agent_type() const { return agent_type_; }
  const std::vector<FlowNode>& nodes() const { return nodes_; }
  const std::vector<FlowEdge>& edges() const { return edges_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  std::span<const std::size_t> children(std::size_t node) const { return children_[node]; }
  std::size_t in_degree(std::size_t node) const { return in_degree_[node]; }

  std::vector<std::size_t> start_candidates() const;
  // Set only when exactly one start node exists.
  std::optional<std::size_t> start() const;

  BehaviourFlow with_agent_type(std::string agent_type) const;

  friend bool operator==(const BehaviourFlow& a, const BehaviourFlow& b) {
    return a.agent_type_ == b.agent_type_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::string agent_type_;
  std::vector<FlowNode> nodes_;
  std::vector<FlowEdge> edges_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> in_degree_;
};

/// Reads the GraphML profile. The behaviour name comes from the node's
/// `label` data key or, failing that, a yEd NodeLabel; the trigger from the
/// `d_trigger` key or a JSON-valued yEd description. A node labelled `start`
/// (any case) is the start node.
///
/// Errors: MALFORMED_XML, NOT_GRAPHML, DUPLICATE_NODE_ID, UNKNOWN_NODE,
/// MISSING_LABEL, TRIGGER_MALFORMED, expression parse codes (location = node id).
BehaviourFlow load_flow(std::string_view graphml);

/// Canonical GraphML: same flow always produces the same bytes.
std::string save_flow(const BehaviourFlow& flow);

/// What a flow is checked against: the composed agent type.
struct FlowSchema {
  std::string agent_type;
  std::set<std::string, std::less<>> behaviours;
  KindMap agent_vars;
  KindMap model_vars;
};

/// Graph-shape checks only: NO_START, MULTIPLE_START, START_HAS_PARENT,
/// CYCLE; warnings UNREACHABLE, DUPLICATE_EDGE.
ValidationReport validate_flow_structure(const BehaviourFlow& flow);

/// Structure plus UNKNOWN_BEHAVIOUR, UNBOUND_VARIABLE, TYPE_MISMATCH.
ValidationReport validate_flow(const BehaviourFlow& flow, const FlowSchema& schema);

/// Start node plus one unlinked node per behaviour, each with constant
/// trigger 1. Behaviour order follows the schema's declaration order.
std::string emit_skeleton_flow(const std::string& agent_type, const std::vector<std::string>& behaviours);

}  // namespace facetsim
