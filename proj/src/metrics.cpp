#include "facetsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <sstream>

#include "json_util.hpp"

namespace facetsim {

using nlohmann::json;
using namespace detail;

std::string_view to_string(Reducer r) {
  switch (r) {
    case Reducer::Count: return "count";
    case Reducer::Sum: return "sum";
    case Reducer::Mean: return "mean";
    case Reducer::Min: return "min";
    case Reducer::Max: return "max";
    case Reducer::Value: return "value";
  }
  return "?";
}

namespace {

std::optional<Reducer> parse_reducer(std::string_view s) {
  for (Reducer r : {Reducer::Count, Reducer::Sum, Reducer::Mean, Reducer::Min, Reducer::Max, Reducer::Value}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

bool is_metric_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_' || u == '-' || u == '.';
  });
}

}  // namespace

MetricSpec parse_metric(const json& j, const std::string& path) {
  require_object(j, path);
  allow_keys(j, path, {"name", "agent_type", "reducer", "variable", "filter"});
  MetricSpec m;
  m.name = require_name(j, path, "name");
  if (!is_metric_name(m.name)) {
    schema_error(child_path(path, "name"), "metric names may use letters, digits, '_', '-' and '.' only");
  }
  std::string reducer = require_string(j, path, "reducer");
  auto r = parse_reducer(reducer);
  if (!r) schema_error(child_path(path, "reducer"), "unknown reducer '" + reducer + "'");
  m.reducer = *r;
  m.agent_type = optional_string(j, path, "agent_type");
  m.variable = optional_string(j, path, "variable");
  if (j.contains("filter")) m.filter = read_expression(j["filter"], child_path(path, "filter"));

  if (m.reducer == Reducer::Value) {
    if (m.agent_type || m.filter) schema_error(path, "a 'value' metric reads a model variable; drop agent_type/filter");
    if (!m.variable) schema_error(path, "a 'value' metric needs 'variable'");
  } else {
    if (!m.agent_type) schema_error(path, "missing required field 'agent_type'");
    if (m.reducer == Reducer::Count && m.variable) schema_error(path, "a 'count' metric takes no variable");
    if (m.reducer != Reducer::Count && !m.variable) schema_error(path, "this reducer needs 'variable'");
  }
  return m;
}

json metric_to_json(const MetricSpec& m) {
  json j = {{"name", m.name}, {"reducer", to_string(m.reducer)}};
  if (m.agent_type) j["agent_type"] = *m.agent_type;
  if (m.variable) j["variable"] = *m.variable;
  if (m.filter) j["filter"] = m.filter->source();
  return j;
}

ValidationReport check_metric(const MetricSpec& m, const CompositeModel& model) {
  ValidationReport report;
  const KindMap model_kinds = model.model_var_kinds();
  if (m.reducer == Reducer::Value) {
    auto it = model_kinds.find(*m.variable);
    if (it == model_kinds.end()) {
      report.error("UNKNOWN_VARIABLE", m.name, "no model variable '" + *m.variable + "'", {*m.variable});
    } else if (it->second != ValueKind::Number) {
      report.error("TYPE_MISMATCH", m.name, "metric variable '" + *m.variable + "' is not a number");
    }
    return report;
  }
  const AgentTypeSpec* type = model.find_type(*m.agent_type);
  if (!type) {
    report.error("UNKNOWN_TYPE", m.name, "metric targets unknown agent type '" + *m.agent_type + "'",
                 {*m.agent_type});
    return report;
  }
  if (m.variable) {
    const VarDecl* v = type->find_var(*m.variable);
    if (!v) {
      report.error("UNKNOWN_VARIABLE", m.name, type->name + " has no variable '" + *m.variable + "'", {*m.variable});
    } else if (v->kind != ValueKind::Number) {
      report.error("TYPE_MISMATCH", m.name, "metric variable '" + *m.variable + "' is not a number");
    }
  }
  if (m.filter) {
    const KindMap agent_kinds = type->var_kinds();
    try {
      if (type_check(*m.filter, TypeEnv{&agent_kinds, &model_kinds}) != ValueKind::Boolean) {
        report.error("TYPE_MISMATCH", m.name + ".filter", "filter '" + m.filter->source() + "' is not boolean");
      }
    } catch (const Error& e) {
      report.error(e.code(), m.name + ".filter", std::string(e.what()) + " in '" + m.filter->source() + "'");
    }
  }
  return report;
}

MetricRow collect_metrics(std::span<const MetricSpec> specs, std::span<const AgentState> population,
                          const VarMap& model_vars, std::int64_t tick) {
  MetricRow row;
  row.tick = tick;
  for (const auto& spec : specs) {
    if (spec.reducer == Reducer::Value) {
      auto it = model_vars.find(*spec.variable);
      row.values.push_back(it == model_vars.end() ? std::nullopt : std::optional<double>(it->second.as_number()));
      continue;
    }
    std::size_t n = 0;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& agent : population) {
      if (agent.agent_type != *spec.agent_type) continue;
      if (spec.filter && !evaluate(*spec.filter, EvalContext{&agent.vars, &model_vars}).as_bool()) continue;
      ++n;
      if (spec.variable) {
        double v = agent.vars.at(*spec.variable).as_number();
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    switch (spec.reducer) {
      case Reducer::Count: row.values.push_back(static_cast<double>(n)); break;
      case Reducer::Sum: row.values.push_back(sum); break;
      case Reducer::Mean: row.values.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt); break;
      case Reducer::Min: row.values.push_back(n ? std::optional<double>(lo) : std::nullopt); break;
      case Reducer::Max: row.values.push_back(n ? std::optional<double>(hi) : std::nullopt); break;
      case Reducer::Value: break;
    }
  }
  return row;
}

std::string metrics_csv(const std::vector<std::string>& names, const std::vector<MetricRow>& rows) {
  std::string out = "tick";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (const auto& row : rows) {
    out += std::to_string(row.tick);
    for (const auto& v : row.values) {
      out += ",";
      if (v) out += format_number(*v);
    }
    out += "\n";
  }
  return out;
}

MetricTable parse_metrics_csv(std::string_view csv) {
  auto split = [](std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  MetricTable table;
  std::size_t pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    std::size_t nl = csv.find('\n', pos);
    std::string_view line = csv.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? csv.size() : nl + 1;
    if (line.empty()) continue;
    auto cells = split(line);
    if (header) {
      if (cells.front() != "tick") throw Error("MALFORMED_CSV", "metrics CSV must start with a 'tick' column");
      table.names.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    if (cells.size() != table.names.size() + 1) throw Error("MALFORMED_CSV", "row has the wrong number of cells");
    MetricRow row;
    auto res = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), row.tick);
    if (res.ec != std::errc()) throw Error("MALFORMED_CSV", "bad tick '" + cells[0] + "'");
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i].empty()) {
        row.values.push_back(std::nullopt);
        continue;
      }
      double v = 0.0;
      auto r = std::from_chars(cells[i].data(), cells[i].data() + cells[i].size(), v);
      if (r.ec != std::errc() || r.ptr != cells[i].data() + cells[i].size()) {
        throw Error("MALFORMED_CSV", "bad number '" + cells[i] + "'");
      }
      row.values.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (header) throw Error("MALFORMED_CSV", "metrics CSV is empty");
  return table;
}

}  // namespace facetsim
