#pragma once

#include <cstdint>
#include <string>

#include "facetsim/expr.hpp"

namespace facetsim {

using AgentId = std::int64_t;

struct AgentState {
  AgentId id = 0;
  std::string agent_type;
  VarMap vars;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// One variable write, as produced by a policy or behaviour action.
struct StateDelta {
  AgentId agent = 0;
  std::string variable;
  Value before;
  Value after;
  bool clamped = false;
};

}  // namespace facetsim
