// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>

#include "facetsim/archive.hpp"
#include "facetsim/scenario.hpp"
#include "facetsim/workspace.hpp"
#include "reference_expr.hpp"
#include "support.hpp"

using namespace facetsim;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const Workspace& demo() {
  static const Workspace ws(testing::kDemo);
  return ws;
}

LoadedScenario demo_scenario(const std::string& name) {
  return load_scenario_file(testing::kDemo / "scenarios" / (name + ".json"), demo());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

BehaviourFlow branch(const std::vector<double>& weights) {
  std::vector<FlowNode> nodes{testing::node("s", std::nullopt)};
  std::vector<FlowEdge> edges;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    nodes.push_back(testing::node("c" + std::to_string(i), "b" + std::to_string(i), weights[i]));
    edges.push_back({"s", nodes.back().id});
  }
  return BehaviourFlow("", nodes, edges);
}

Outcome gating() {
  const auto t0 = std::chrono::steady_clock::now();
  BehaviourFlow flow = branch({0.25});
  Rng rng(2024);
  VarMap agent, model;
  std::size_t hits = 0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) hits += traverse(flow, {&agent, &model}, rng, {}).size();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double f = static_cast<double>(hits) / n;
  return {std::fabs(f - 0.25) <= 0.01 && secs < 10,
          "frequency " + fmt("%.4f", f) + " over 100000 traversals in " + fmt("%.2f", secs) + " s"};
}

Outcome tournament() {
  const std::vector<double> w{0.2, 0.3, 0.5};
  BehaviourFlow flow = branch(w);
  Rng rng(7);
  VarMap agent, model;
  std::vector<double> counts(3, 0);
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& b : traverse(flow, {&agent, &model}, rng, {})) counts[static_cast<std::size_t>(b[1] - '0')] += 1;
  }
  double chi2 = 0, worst = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    chi2 += std::pow(counts[i] - w[i] * n, 2) / (w[i] * n);
    worst = std::max(worst, std::fabs(counts[i] / n - w[i]));
  }
  // chi-square critical value for df = 2 at p = 0.001
  return {worst <= 0.01 && chi2 < 13.8155,
          "max deviation " + fmt("%.4f", worst) + ", chi2 " + fmt("%.3f", chi2) + " < 13.8155"};
}

Outcome constant_trigger() {
  auto plan = std::make_shared<RunPlan>();
  plan->model = std::make_shared<const CompositeModel>(testing::composite({R"({"name":"Clock","agent_types":[{
      "name":"Ticker","creates_type":true,"state_vars":[{"name":"n","kind":"number"}],
      "behaviours":[{"name":"tick-over","actions":[{"op":"add","variable":"n","value":"1"}]}]}]})"}));
  plan->flows["Ticker"] = BehaviourFlow(
      "", {testing::node("s", std::nullopt), {"t", "tick-over", parse_trigger_json(R"({"rules":[],"default":"1"})")}},
      {{"s", "t"}});
  plan->populations["Ticker"] = 1;
  plan->iterations = 1000;
  plan->seed = 5;
  ModelState state = initialize_run(plan);
  std::int64_t misses = 0;
  while (!state.finished()) {
    const TickReport r = step(state);
    if (r.traces.size() != 1 || r.traces[0].executed != std::vector<std::string>{"tick-over"}) ++misses;
  }
  const bool counted = state.agents[0].vars.at("n") == Value(1000);
  return {misses == 0 && counted, std::to_string(misses) + " misses over 1000 ticks"};
}

Outcome determinism() {
  testing::TempDir out;
  LoadedScenario s = demo_scenario("document-procurement");
  auto csv = [&](std::uint64_t seed) {
    return testing::slurp(persist_run(run_scenario(s, seed), out.path()).dir / "metrics.csv");
  };
  const std::string a = csv(42), b = csv(42), c = csv(43);
  return {a == b && a != c && !a.empty(),
          std::string("seed 42 twice ") + (a == b ? "identical" : "DIFFERENT") + ", seed 43 " +
              (a != c ? "differs" : "IDENTICAL")};
}

Outcome prerequisites() {
  LoadedScenario s = demo_scenario("driving-license");
  auto base = std::make_shared<RunPlan>(*s.plan);
  base->populations["Migrant"] = 10;
  std::size_t violations = 0, drives = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto plan = std::make_shared<RunPlan>(*base);
    plan->seed = seed;
    ModelState state = initialize_run(plan);
    std::set<AgentId> licensed;
    while (!state.finished()) {
      for (const auto& trace : step(state).traces) {
        for (const auto& b : trace.executed) {
          if (b == "apply-for-license") licensed.insert(trace.agent);
          if (b == "drive") {
            ++drives;
            if (!licensed.count(trace.agent)) ++violations;
          }
        }
      }
    }
  }
  return {violations == 0 && drives > 0,
          std::to_string(violations) + " violations in 1000 runs (" + std::to_string(drives) + " drives)"};
}

Outcome dependencies() {
  try {
    resolve_dependencies({"HousingFacet"}, demo().facets().manifests);
  } catch (const ValidationFailed& e) {
    const Diagnostic* d = e.report().find_error("MISSING_DEPENDENCY");
    const bool both = d && std::set<std::string>(d->subjects.begin(), d->subjects.end()) ==
                               std::set<std::string>{"SchoolFacet", "PublicTransportFacet"};
    return {both, d ? d->message : "no MISSING_DEPENDENCY"};
  }
  return {false, "HousingFacet resolved without its dependencies"};
}

Outcome composition() {
  auto facet = [](const std::string& name, bool creates) {
    return parse_manifest(json{{"name", name},
                               {"agent_types",
                                {{{"name", "Migrant"},
                                  {"creates_type", creates},
                                  {"state_vars", {{{"name", "income"}, {"kind", "number"}}}}}}}});
  };
  bool conflict = false;
  try {
    compose(base_model(), {facet("FacetA", true), facet("FacetB", false)});
  } catch (const ValidationFailed& e) {
    const Diagnostic* d = e.report().find_error("DUPLICATE_VAR");
    conflict = d && d->subjects == std::vector<std::string>{"FacetA", "FacetB"};
  }

  std::mt19937_64 rng(99);
  int equal = 0;
  const int sets = 120;
  for (int k = 0; k < sets; ++k) {
    std::vector<FacetManifest> facets;
    const int n = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      const std::string t = "T" + std::to_string(i);
      json type{{"name", t}, {"creates_type", true}, {"state_vars", json::array()}, {"behaviours", json::array()}};
      for (std::uint64_t v = 0, nv = 1 + rng() % 3; v < nv; ++v) {
        type["state_vars"].push_back({{"name", "v" + std::to_string(v)}, {"kind", "number"}, {"init", "model.g" + std::to_string(i)}});
      }
      type["behaviours"].push_back(
          {{"name", "act"}, {"actions", {{{"op", "add"}, {"variable", "v0"}, {"value", "1"}}}}});
      facets.push_back(parse_manifest(json{{"name", "F" + std::to_string(i)},
                                           {"agent_types", {type}},
                                           {"model_vars", {{{"name", "g" + std::to_string(i)}, {"kind", "number"}}}}}));
    }
    std::vector<FacetManifest> shuffled = facets;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (structurally_equal(compose(base_model(), facets), compose(base_model(), shuffled))) ++equal;
  }
  return {conflict && equal == sets, std::string("conflict names both: ") + (conflict ? "yes" : "no") + "; " +
                                         std::to_string(equal) + "/" + std::to_string(sets) + " permutations equal"};
}

Outcome subsidy() {
  LoadedScenario on = demo_scenario("insurance-subsidy");
  std::vector<AgentState> final_agents;
  RunResult with = run_scenario(on, std::nullopt, [&](const ModelState& s, const TickReport&) { final_agents = s.agents; });
  std::size_t halved = 0, kept = 0, wrong = 0;
  for (const auto& a : final_agents) {
    const bool low = a.vars.at("income").as_number() < 30000;
    const Value expected = low ? Value(600) : Value(1200);
    if (a.vars.at("insurance_cost") != expected) ++wrong;
    (low ? halved : kept)++;
  }
  json off = json::parse(on.source);
  off["policies"] = json::array();
  json never = json::parse(on.source);
  json p = json::parse(demo().read("policies/insurance-subsidy.json"));
  p["condition"] = "false";
  never["policies"] = json::array({p});
  const std::string off_csv = run_scenario(load_scenario(off.dump(), demo())).csv();
  const std::string never_csv = run_scenario(load_scenario(never.dump(), demo())).csv();
  const bool same = off_csv == never_csv;
  return {wrong == 0 && halved > 0 && kept > 0 && same && with.csv() != off_csv,
          std::to_string(halved) + " halved, " + std::to_string(kept) + " unchanged, " + std::to_string(wrong) +
              " wrong; policy-off vs condition-false " + (same ? "identical" : "DIFFERENT")};
}

Outcome expressions() {
  ref::Generator gen(31337);
  int disagreements = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    ref::P tree = gen.make(i % 2 ? ref::T::Num : ref::T::Bool, 6);
    ref::Env env = gen.env();
    VarMap agent, model;
    for (const auto& [name, v] : env.vars) {
      VarMap& target = name.starts_with("agent.") ? agent : model;
      std::visit([&](const auto& x) { target[name.substr(name.find('.') + 1)] = Value(x); }, v);
    }
    std::optional<ref::Val> expected = ref::eval(*tree, env);
    std::optional<Value> actual;
    try {
      actual = evaluate(parse_expression(ref::render(*tree)), {&agent, &model});
    } catch (const Error&) {
    }
    bool agree = expected.has_value() == actual.has_value();
    if (agree && expected) {
      if (const double* d = std::get_if<double>(&*expected)) {
        agree = actual->is_number() && ref::within_one_ulp(*d, actual->as_number());
      } else if (const bool* b = std::get_if<bool>(&*expected)) {
        agree = actual->is_bool() && actual->as_bool() == *b;
      } else {
        agree = actual->is_text() && actual->as_text() == std::get<std::string>(*expected);
      }
    }
    if (!agree) ++disagreements;
  }
  return {disagreements == 0, std::to_string(disagreements) + " disagreements over " + std::to_string(n) + " trees"};
}

Outcome graphml() {
  std::size_t flows = 0, broken = 0;
  for (const auto& rel : demo().list("flows", ".graphml")) {
    ++flows;
    BehaviourFlow f = load_flow(demo().read(rel));
    if (!(load_flow(save_flow(f)) == f)) ++broken;
  }
  CompositeModel model = compose_workspace(demo().facets());
  std::size_t skeleton_failures = 0;
  for (const auto& type : model.agent_types) {
    BehaviourFlow f = load_flow(emit_skeleton_flow(type));
    ValidationReport r = validate_flow(f, flow_schema(model, type));
    if (f.nodes().size() != type.behaviours.size() + 1 || !r.ok()) ++skeleton_failures;
  }
  return {flows > 0 && broken == 0 && skeleton_failures == 0,
          std::to_string(flows - broken) + "/" + std::to_string(flows) + " demo flows isomorphic, " +
              std::to_string(model.agent_types.size() - skeleton_failures) + "/" +
              std::to_string(model.agent_types.size()) + " skeletons N+1 with warnings only"};
}

Outcome lockdown() {
  LoadedScenario s = demo_scenario("lockdown");
  std::vector<double> shares;
  for (double urgency : {0.5, 1.0, 2.0}) {
    auto plan = std::make_shared<RunPlan>(*s.plan);
    plan->populations["Citizen"] = 10000;
    plan->iterations = 10;
    plan->model_var_overrides["urgency_food"] = urgency;
    ModelState state = initialize_run(plan);
    double food = 0, total = 0;
    while (!state.finished()) {
      for (const auto& t : step(state).traces) {
        for (const auto& b : t.executed) {
          if (b == "shop-for-food") ++food;
          if (b == "shop-for-food" || b == "meet-friends" || b == "go-exercise") ++total;
        }
      }
    }
    shares.push_back(total > 0 ? food / total : 0);
  }
  const bool rising = shares[0] < shares[1] && shares[1] < shares[2];
  return {rising, "food share " + fmt("%.4f", shares[0]) + " < " + fmt("%.4f", shares[1]) + " < " +
                      fmt("%.4f", shares[2])};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"traversal gating", gating},
      {"tournament selection", tournament},
      {"constant trigger", constant_trigger},
      {"determinism", determinism},
      {"prerequisite safety", prerequisites},
      {"facet dependency check", dependencies},
      {"composition conflicts", composition},
      {"policy subsidy", subsidy},
      {"expression equivalence", expressions},
      {"graphml round trip", graphml},
      {"lockdown monotonicity", lockdown},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2zu %-24s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed;
}
