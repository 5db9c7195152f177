#include "facetsim/flow.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

namespace facetsim {

using nlohmann::json;
namespace pt = boost::property_tree;

// ---------------------------------------------------------------------------
// Triggers

TriggerSpec TriggerSpec::constant(double p) {
  TriggerSpec spec;
  spec.default_value = Expression(make_literal(p), format_number(p));
  return spec;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.begin();
  auto e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Expression trigger_expression(const json& j, const std::string& path) {
  std::string text;
  if (j.is_string()) {
    text = j.get<std::string>();
  } else if (j.is_number() || j.is_boolean()) {
    text = j.dump();
  } else {
    throw Error("TRIGGER_MALFORMED", "expression must be a string", path);
  }
  try {
    return parse_expression(text);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " in '" + text + "'", path);
  }
}

}  // namespace

TriggerSpec parse_trigger_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("TRIGGER_MALFORMED", std::string("trigger is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("TRIGGER_MALFORMED", "trigger must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "rules" && key != "default") {
      throw Error("TRIGGER_MALFORMED", "unknown trigger field '" + key + "'", key);
    }
  }
  if (!doc.contains("default")) throw Error("TRIGGER_MALFORMED", "trigger needs a 'default' expression");

  TriggerSpec spec;
  spec.default_value = trigger_expression(doc["default"], "default");
  if (doc.contains("rules")) {
    const json& rules = doc["rules"];
    if (!rules.is_array()) throw Error("TRIGGER_MALFORMED", "'rules' must be an array", "rules");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const std::string path = "rules[" + std::to_string(i) + "]";
      const json& r = rules[i];
      if (!r.is_object() || !r.contains("value")) {
        throw Error("TRIGGER_MALFORMED", "rule needs a 'value' expression", path);
      }
      for (const auto& [key, _] : r.items()) {
        if (key != "when" && key != "value") {
          throw Error("TRIGGER_MALFORMED", "unknown rule field '" + key + "'", path);
        }
      }
      TriggerRule rule;
      rule.value = trigger_expression(r["value"], path + ".value");
      if (r.contains("when")) {
        const json& when = r["when"];
        if (!when.is_array()) throw Error("TRIGGER_MALFORMED", "'when' must be an array", path + ".when");
        for (std::size_t k = 0; k < when.size(); ++k) {
          rule.when.push_back(trigger_expression(when[k], path + ".when[" + std::to_string(k) + "]"));
        }
      }
      spec.rules.push_back(std::move(rule));
    }
  }
  return spec;
}

std::string trigger_to_json(const TriggerSpec& spec) {
  json rules = json::array();
  for (const auto& r : spec.rules) {
    json when = json::array();
    for (const auto& c : r.when) when.push_back(trim(c.source()));
    rules.push_back({{"when", when}, {"value", trim(r.value.source())}});
  }
  return json{{"rules", rules}, {"default", trim(spec.default_value.source())}}.dump();
}

TriggerResult evaluate_trigger(const TriggerSpec& spec, const EvalContext& ctx) {
  const Expression* chosen = &spec.default_value;
  for (const auto& rule : spec.rules) {
    bool all = true;
    for (const auto& criterion : rule.when) {
      Value v = evaluate(criterion, ctx);
      if (!v.is_bool()) {
        throw Error("TYPE_MISMATCH", "trigger criterion '" + criterion.source() + "' is not boolean");
      }
      if (!v.as_bool()) {
        all = false;
        break;
      }
    }
    if (all) {
      chosen = &rule.value;
      break;
    }
  }
  Value v = evaluate(*chosen, ctx);
  if (!v.is_number()) {
    throw Error("TYPE_MISMATCH", "trigger value '" + chosen->source() + "' is not a number");
  }
  TriggerResult result;
  result.raw = v.as_number();
  result.probability = std::clamp(result.raw, 0.0, 1.0);
  result.clamped = result.probability != result.raw;
  return result;
}

// ---------------------------------------------------------------------------
// BehaviourFlow

BehaviourFlow::BehaviourFlow(std::string agent_type, std::vector<FlowNode> nodes, std::vector<FlowEdge> edges)
    : agent_type_(std::move(agent_type)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index.emplace(nodes_[i].id, i).second) {
      throw Error("DUPLICATE_NODE_ID", "node id '" + nodes_[i].id + "' is used more than once", nodes_[i].id);
    }
  }
  children_.resize(nodes_.size());
  in_degree_.assign(nodes_.size(), 0);
  for (const auto& e : edges_) {
    auto s = index.find(e.source);
    auto t = index.find(e.target);
    if (s == index.end() || t == index.end()) {
      const std::string& missing = s == index.end() ? e.source : e.target;
      throw Error("UNKNOWN_NODE", "edge " + e.source + "->" + e.target + " references unknown node '" + missing + "'",
                  e.source + "->" + e.target);
    }
    children_[s->second].push_back(t->second);
    ++in_degree_[t->second];
  }
}

std::optional<std::size_t> BehaviourFlow::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> BehaviourFlow::start_candidates() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_start()) out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> BehaviourFlow::start() const {
  auto c = start_candidates();
  if (c.size() == 1) return c.front();
  return std::nullopt;
}

BehaviourFlow BehaviourFlow::with_agent_type(std::string agent_type) const {
  return BehaviourFlow(std::move(agent_type), nodes_, edges_);
}

// ---------------------------------------------------------------------------
// GraphML reading

namespace {

struct KeyIds {
  std::set<std::string> label;
  std::set<std::string> trigger;
  std::set<std::string> description;
  std::set<std::string> agent_type;
};

std::string attr(const pt::ptree& node, const std::string& name) {
  auto attrs = node.get_child_optional("<xmlattr>");
  if (!attrs) return "";
  return attrs->get<std::string>(pt::ptree::path_type(name, '/'), "");
}

KeyIds collect_keys(const pt::ptree& graphml) {
  KeyIds keys;
  for (const auto& [tag, key] : graphml) {
    if (tag != "key") continue;
    const std::string id = attr(key, "id");
    const std::string target = attr(key, "for");
    const std::string name = attr(key, "attr.name");
    if (target == "node" || target == "all") {
      if (name == "label") keys.label.insert(id);
      if (id == "d_trigger" || name == "trigger") keys.trigger.insert(id);
      if (name == "description") keys.description.insert(id);
    }
    if ((target == "graph" || target == "all") && (id == "d_agent_type" || name == "agent_type")) {
      keys.agent_type.insert(id);
    }
  }
  // The reserved trigger id works even without a declaration.
  keys.trigger.insert("d_trigger");
  return keys;
}

std::optional<std::string> find_node_label(const pt::ptree& tree) {
  for (const auto& [tag, child] : tree) {
    if (tag == "y:NodeLabel") {
      std::string text = trim(child.data());
      if (!text.empty()) return text;
    }
    if (tag == "<xmlattr>") continue;
    if (auto found = find_node_label(child)) return found;
  }
  return std::nullopt;
}

FlowNode read_node(const pt::ptree& node, const KeyIds& keys) {
  FlowNode out;
  out.id = attr(node, "id");
  if (out.id.empty()) throw Error("NOT_GRAPHML", "node without an id attribute");

  std::optional<std::string> label;
  std::optional<std::string> trigger_text;
  std::optional<std::string> description;
  for (const auto& [tag, child] : node) {
    if (tag == "graph") {
      throw Error("NOT_GRAPHML", "nested graphs (groups) are not supported", out.id);
    }
    if (tag != "data") continue;
    const std::string key = attr(child, "key");
    const std::string text = trim(child.data());
    if (keys.label.count(key) && !text.empty()) label = text;
    if (keys.trigger.count(key) && !text.empty()) trigger_text = text;
    if (keys.description.count(key) && !text.empty()) description = text;
  }
  if (!label) label = find_node_label(node);
  if (!label) throw Error("MISSING_LABEL", "node '" + out.id + "' has no label naming its behaviour", out.id);

  // A description only counts as a trigger when it holds a JSON object;
  // free-text descriptions are ordinary yEd notes.
  if (!trigger_text && description && description->front() == '{') trigger_text = description;

  if (lower(*label) != "start") out.behaviour = *label;
  if (trigger_text) {
    try {
      out.trigger = parse_trigger_json(*trigger_text);
    } catch (const Error& e) {
      std::string where = out.id + (e.location().empty() ? "" : "." + e.location());
      throw Error(e.code(), "node '" + out.id + "': " + e.what(), where);
    }
  } else {
    out.trigger = TriggerSpec::constant(1.0);
  }
  return out;
}

}  // namespace

BehaviourFlow load_flow(std::string_view graphml) {
  pt::ptree doc;
  try {
    std::istringstream in{std::string(graphml)};
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw Error("MALFORMED_XML", "malformed XML: " + e.message(), "line " + std::to_string(e.line()));
  }
  auto root = doc.get_child_optional("graphml");
  if (!root) throw Error("NOT_GRAPHML", "document has no <graphml> root element");
  KeyIds keys = collect_keys(*root);

  const pt::ptree* graph = nullptr;
  for (const auto& [tag, child] : *root) {
    if (tag == "graph") {
      if (graph) throw Error("NOT_GRAPHML", "document contains more than one <graph>");
      graph = &child;
    }
  }
  if (!graph) throw Error("NOT_GRAPHML", "document has no <graph> element");
  if (attr(*graph, "edgedefault") == "undirected") {
    throw Error("NOT_GRAPHML", "behaviour flows must be directed graphs");
  }

  std::string agent_type;
  std::vector<FlowNode> nodes;
  std::vector<FlowEdge> edges;
  for (const auto& [tag, child] : *graph) {
    if (tag == "data" && keys.agent_type.count(attr(child, "key"))) {
      agent_type = trim(child.data());
    } else if (tag == "node") {
      nodes.push_back(read_node(child, keys));
    } else if (tag == "edge") {
      FlowEdge e{attr(child, "source"), attr(child, "target")};
      if (e.source.empty() || e.target.empty()) throw Error("NOT_GRAPHML", "edge without source or target");
      edges.push_back(std::move(e));
    }
  }
  return BehaviourFlow(std::move(agent_type), std::move(nodes), std::move(edges));
}

// ---------------------------------------------------------------------------
// GraphML writing

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string save_flow(const BehaviourFlow& flow) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
     << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\""
     << " xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\""
     << " xmlns:y=\"http://www.yworks.com/xml/graphml\""
     << " xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns"
     << " http://www.yworks.com/xml/schema/graphml/1.1/ygraphml.xsd\">\n"
     << "  <key id=\"d_agent_type\" for=\"graph\" attr.name=\"agent_type\" attr.type=\"string\"/>\n"
     << "  <key id=\"d_label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n"
     << "  <key id=\"d_trigger\" for=\"node\" attr.name=\"trigger\" attr.type=\"string\"/>\n"
     << "  <key id=\"d_graphics\" for=\"node\" yfiles.type=\"nodegraphics\"/>\n"
     << "  <graph id=\"G\" edgedefault=\"directed\">\n";
  if (!flow.agent_type().empty()) {
    os << "    <data key=\"d_agent_type\">" << xml_escape(flow.agent_type()) << "</data>\n";
  }
  int row = 0;
  for (const auto& node : flow.nodes()) {
    const std::string label = node.behaviour.value_or("start");
    os << "    <node id=\"" << xml_escape(node.id) << "\">\n"
       << "      <data key=\"d_label\">" << xml_escape(label) << "</data>\n";
    if (!node.is_start()) {
      os << "      <data key=\"d_trigger\">" << xml_escape(trigger_to_json(node.trigger)) << "</data>\n";
    }
    os << "      <data key=\"d_graphics\">\n"
       << "        <y:ShapeNode>\n"
       << "          <y:Geometry height=\"30.0\" width=\"180.0\" x=\"0.0\" y=\"" << row * 60 << ".0\"/>\n"
       << "          <y:Shape type=\"" << (node.is_start() ? "ellipse" : "roundrectangle") << "\"/>\n"
       << "          <y:NodeLabel>" << xml_escape(label) << "</y:NodeLabel>\n"
       << "        </y:ShapeNode>\n"
       << "      </data>\n"
       << "    </node>\n";
    ++row;
  }
  int edge_no = 0;
  for (const auto& e : flow.edges()) {
    os << "    <edge id=\"e" << edge_no++ << "\" source=\"" << xml_escape(e.source) << "\" target=\""
       << xml_escape(e.target) << "\"/>\n";
  }
  os << "  </graph>\n</graphml>\n";
  return os.str();
}

std::string emit_skeleton_flow(const std::string& agent_type, const std::vector<std::string>& behaviours) {
  std::vector<FlowNode> nodes;
  nodes.push_back({"n0", std::nullopt, TriggerSpec::constant(1.0)});
  for (std::size_t i = 0; i < behaviours.size(); ++i) {
    nodes.push_back({"n" + std::to_string(i + 1), behaviours[i], TriggerSpec::constant(1.0)});
  }
  return save_flow(BehaviourFlow(agent_type, std::move(nodes), {}));
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_flow_structure(const BehaviourFlow& flow) {
  ValidationReport report;
  const auto& nodes = flow.nodes();
  auto starts = flow.start_candidates();
  if (starts.empty()) {
    report.error("NO_START", "", "flow has no node labelled 'start'");
  } else if (starts.size() > 1) {
    std::vector<std::string> ids;
    for (auto i : starts) ids.push_back(nodes[i].id);
    std::string list;
    for (const auto& id : ids) list += (list.empty() ? "" : ", ") + id;
    report.error("MULTIPLE_START", ids.front(), "flow has several start nodes: " + list, ids);
  }
  for (auto s : starts) {
    if (flow.in_degree(s) > 0) {
      report.error("START_HAS_PARENT", nodes[s].id, "the start node must not have incoming edges");
    }
  }

  // Cycle detection; one diagnostic per back edge.
  enum class Mark { White, Grey, Black };
  std::vector<Mark> mark(nodes.size(), Mark::White);
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t root = 0; root < nodes.size(); ++root) {
    if (mark[root] != Mark::White) continue;
    mark[root] = Mark::Grey;
    stack.push_back({root, 0});
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      auto kids = flow.children(node);
      if (next < kids.size()) {
        std::size_t child = kids[next++];
        if (mark[child] == Mark::Grey) {
          const std::string where = nodes[node].id + "->" + nodes[child].id;
          report.error("CYCLE", where, "edge " + where + " closes a cycle", {nodes[node].id, nodes[child].id});
        } else if (mark[child] == Mark::White) {
          mark[child] = Mark::Grey;
          stack.push_back({child, 0});
        }
      } else {
        mark[node] = Mark::Black;
        stack.pop_back();
      }
    }
  }

  std::set<std::pair<std::string, std::string>> seen_edges;
  for (const auto& e : flow.edges()) {
    if (!seen_edges.insert({e.source, e.target}).second) {
      report.warn("DUPLICATE_EDGE", e.source + "->" + e.target, "edge appears more than once");
    }
  }

  if (auto start = flow.start()) {
    std::vector<bool> reached(nodes.size(), false);
    std::vector<std::size_t> frontier{*start};
    reached[*start] = true;
    while (!frontier.empty()) {
      std::size_t n = frontier.back();
      frontier.pop_back();
      for (std::size_t c : flow.children(n)) {
        if (!reached[c]) {
          reached[c] = true;
          frontier.push_back(c);
        }
      }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!reached[i]) {
        report.warn("UNREACHABLE", nodes[i].id, "node '" + nodes[i].id + "' cannot be reached from start");
      }
    }
  }
  return report;
}

namespace {

void check_trigger_expr(const Expression& e, ValueKind want, const std::string& where, const FlowSchema& schema,
                        ValidationReport& report) {
  bool unbound = false;
  for (const auto& name : free_variables(e)) {
    bool is_agent = name.rfind("agent.", 0) == 0;
    std::string_view var = std::string_view(name).substr(name.find('.') + 1);
    const KindMap& vars = is_agent ? schema.agent_vars : schema.model_vars;
    if (vars.find(var) == vars.end()) {
      report.error("UNBOUND_VARIABLE", where, "unknown variable " + name + " in '" + e.source() + "'", {name});
      unbound = true;
    }
  }
  if (unbound) return;
  try {
    ValueKind got = type_check(e, TypeEnv{&schema.agent_vars, &schema.model_vars});
    if (got != want) {
      report.error("TYPE_MISMATCH", where,
                   "'" + e.source() + "' is " + std::string(to_string(got)) + ", expected " +
                       std::string(to_string(want)));
    }
  } catch (const Error& err) {
    report.error(err.code(), where, std::string(err.what()) + " in '" + e.source() + "'");
  }
}

}  // namespace

ValidationReport validate_flow(const BehaviourFlow& flow, const FlowSchema& schema) {
  ValidationReport report = validate_flow_structure(flow);
  for (const auto& node : flow.nodes()) {
    if (node.is_start()) continue;
    if (!schema.behaviours.count(*node.behaviour)) {
      report.error("UNKNOWN_BEHAVIOUR", node.id,
                   "node '" + node.id + "' names behaviour '" + *node.behaviour + "' which " + schema.agent_type +
                       " does not define",
                   {*node.behaviour});
    }
    for (std::size_t r = 0; r < node.trigger.rules.size(); ++r) {
      const auto& rule = node.trigger.rules[r];
      for (const auto& c : rule.when) {
        check_trigger_expr(c, ValueKind::Boolean, node.id, schema, report);
      }
      check_trigger_expr(rule.value, ValueKind::Number, node.id, schema, report);
    }
    check_trigger_expr(node.trigger.default_value, ValueKind::Number, node.id, schema, report);
  }
  return report;
}

}  // namespace facetsim
