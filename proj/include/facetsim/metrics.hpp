#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "facetsim/agent.hpp"
#include "facetsim/facet.hpp"

namespace facetsim {

enum class Reducer { Count, Sum, Mean, Min, Max, Value };

std::string_view to_string(Reducer r);

/// One collected column. Agent metrics reduce `variable` over the agents of
/// `agent_type` that pass `filter`; a `value` metric reads a model variable.
struct MetricSpec {
  std::string name;
  std::optional<std::string> agent_type;
  Reducer reducer = Reducer::Count;
  std::optional<std::string> variable;
  std::optional<Expression> filter;

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

MetricSpec parse_metric(const nlohmann::json& j, const std::string& path = {});
nlohmann::json metric_to_json(const MetricSpec& m);

ValidationReport check_metric(const MetricSpec& m, const CompositeModel& model);

struct MetricRow {
  std::int64_t tick = 0;
  std::vector<std::optional<double>> values;  // nullopt = empty cell

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

/// count/sum over an empty set give 0; mean/min/max give an empty cell.
MetricRow collect_metrics(std::span<const MetricSpec> specs, std::span<const AgentState> population,
                          const VarMap& model_vars, std::int64_t tick);

/// Header `tick,<names>`, shortest round-trip numbers, empty null cells.
std::string metrics_csv(const std::vector<std::string>& names, const std::vector<MetricRow>& rows);

struct MetricTable {
  std::vector<std::string> names;
  std::vector<MetricRow> rows;
};

/// Inverse of metrics_csv. Errors: MALFORMED_CSV.
MetricTable parse_metrics_csv(std::string_view csv);

}  // namespace facetsim
