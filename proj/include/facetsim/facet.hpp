#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "facetsim/error.hpp"
#include "facetsim/expr.hpp"
#include "facetsim/flow.hpp"

namespace facetsim {

struct NumberRange {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const NumberRange&, const NumberRange&) = default;
};

struct VarDecl {
  std::string name;
  ValueKind kind = ValueKind::Number;
  Expression init;
  std::optional<NumberRange> range;

  friend bool operator==(const VarDecl&, const VarDecl&) = default;
};

enum class ActionOp { Set, Add, Multiply };

std::string_view to_string(ActionOp op);
std::optional<ActionOp> parse_action_op(std::string_view text);

/// set / add / multiply on one variable of the acting agent.
struct UpdateAction {
  ActionOp op = ActionOp::Set;
  std::string variable;
  Expression operand;

  friend bool operator==(const UpdateAction&, const UpdateAction&) = default;
};

/// Pair with one agent of `target_type` that satisfies `target_filter`
/// (evaluated with `agent.` bound to the candidate). Self actions run against
/// the acting agent, target actions against the chosen partner.
struct MatchAction {
  std::string target_type;
  Expression target_filter;
  std::vector<UpdateAction> self_actions;
  std::vector<UpdateAction> target_actions;

  friend bool operator==(const MatchAction&, const MatchAction&) = default;
};

using Action = std::variant<UpdateAction, MatchAction>;

struct BehaviourDef {
  std::string name;
  std::vector<Action> actions;

  friend bool operator==(const BehaviourDef&, const BehaviourDef&) = default;
};

struct AgentTypeDelta {
  std::string name;
  bool creates_type = false;
  std::vector<VarDecl> state_vars;
  std::vector<BehaviourDef> behaviours;

  friend bool operator==(const AgentTypeDelta&, const AgentTypeDelta&) = default;
};

struct FacetManifest {
  std::string name;
  std::vector<std::string> depends_on;
  std::vector<AgentTypeDelta> agent_types;
  std::vector<VarDecl> model_vars;

  friend bool operator==(const FacetManifest&, const FacetManifest&) = default;
};

/// Errors: SCHEMA_VIOLATION or an expression parse code, with the JSON path
/// of the offending element as location.
FacetManifest parse_manifest(std::string_view document);
FacetManifest parse_manifest(const nlohmann::json& document);
inline FacetManifest parse_manifest(const std::string& document) { return parse_manifest(std::string_view(document)); }
inline FacetManifest parse_manifest(const char* document) { return parse_manifest(std::string_view(document)); }
nlohmann::json manifest_to_json(const FacetManifest& manifest);

struct AgentTypeSpec {
  std::string name;
  std::vector<VarDecl> vars;
  std::vector<BehaviourDef> behaviours;

  const VarDecl* find_var(std::string_view var) const;
  const BehaviourDef* find_behaviour(std::string_view behaviour) const;
  KindMap var_kinds() const;
};

/// Every declared name mapped to the facet that introduced it. Keys:
/// "type:T", "var:T.v", "behaviour:T.b", "model_var:v".
using Provenance = std::map<std::string, std::string>;

struct CompositeModel {
  std::vector<AgentTypeSpec> agent_types;  // creation order
  std::vector<VarDecl> model_vars;         // declaration order; `tick` first
  Provenance provenance;
  std::vector<std::string> facets;  // application order

  const AgentTypeSpec* find_type(std::string_view type) const;
  const VarDecl* find_model_var(std::string_view var) const;
  KindMap model_var_kinds() const;
};

/// The empty base model: no agent types, one built-in model variable `tick`.
CompositeModel base_model();

/// Order-insensitive comparison of types, variables, behaviours and provenance.
bool structurally_equal(const CompositeModel& a, const CompositeModel& b);

/// Orders `selected` so that every facet follows its dependencies, keeping
/// the user's order among independent facets. Throws ValidationFailed with
/// UNKNOWN_FACET, MISSING_DEPENDENCY or CYCLIC_DEPENDENCY.
std::vector<std::string> resolve_dependencies(const std::vector<std::string>& selected,
                                              const std::map<std::string, FacetManifest>& available);

/// Applies facets in order. Throws ValidationFailed with DUPLICATE_TYPE,
/// DUPLICATE_VAR, DUPLICATE_BEHAVIOUR, EXTENDS_UNKNOWN_TYPE (each naming both
/// facets involved), INVALID_INIT_REFERENCE or TYPE_MISMATCH.
///
/// An initializer may read model variables and variables declared earlier
/// by its own facet or by the facets it (transitively) depends on.
CompositeModel compose(const CompositeModel& base, const std::vector<FacetManifest>& facets);

/// Behaviour-level checks over the composed model: written variables exist,
/// operand and filter kinds, match targets.
ValidationReport check_composite(const CompositeModel& model);

FlowSchema flow_schema(const CompositeModel& model, const AgentTypeSpec& type);

/// Skeleton GraphML for one composed agent type.
std::string emit_skeleton_flow(const AgentTypeSpec& type);

struct UpdateResult {
  Value value;
  bool clamped = false;
};

/// Applies set/add/multiply to `current`, clamping numbers into `range`.
/// Errors: TYPE_MISMATCH.
UpdateResult apply_update(ActionOp op, const Value& current, const Value& operand,
                          const std::optional<NumberRange>& range);

}  // namespace facetsim
