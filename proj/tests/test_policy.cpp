#include <doctest.h>

#include <random>

#include "facetsim/policy.hpp"
#include "support.hpp"

using namespace facetsim;

namespace {

const char* kSubsidy =
    R"({"name":"insurance-subsidy","target_agent_type":"Migrant","condition":"agent.income < 30000",)"
    R"("action":{"op":"multiply","variable":"insurance_cost","operand":"0.5"},"mode":"once"})";

const CompositeModel& model() {
  static const CompositeModel m = testing::composite({R"({"name":"MigrantFacet","agent_types":[{
      "name":"Migrant","creates_type":true,"state_vars":[
        {"name":"income","kind":"number","init":"25000","range":[0,100000]},
        {"name":"insurance_cost","kind":"number","init":"1000","range":[0,5000]},
        {"name":"has_job","kind":"boolean"},
        {"name":"rent","kind":"number","init":"800"}]}],
      "model_vars":[{"name":"minimum_wage","kind":"number","init":"12.7"}]})",
      R"({"name":"Employers","agent_types":[{"name":"Employer","creates_type":true,
        "state_vars":[{"name":"vacancies","kind":"number","init":"3"}]}]})"});
  return m;
}

AgentState migrant(AgentId id, double income, double cost = 1000) {
  return {id, "Migrant", {{"income", income}, {"insurance_cost", cost}, {"has_job", false}, {"rent", 800.0}}};
}

std::string policy_error(const std::string& doc) {
  try {
    parse_policy(doc);
  } catch (const Error& e) {
    return e.code();
  }
  return "no error";
}

Policy policy(const std::string& target, const std::string& condition, const std::string& op,
              const std::string& variable, const std::string& operand, const std::string& mode = "once") {
  nlohmann::json j{{"name", "p"},
                   {"target_agent_type", target},
                   {"condition", condition},
                   {"action", {{"op", op}, {"variable", variable}, {"operand", operand}}},
                   {"mode", mode}};
  return parse_policy(j);
}

void apply_all(const Policy& p, std::size_t index, std::vector<AgentState>& pop, const VarMap& mv,
               PolicyApplicationLog& log, std::int64_t tick) {
  for (AgentId id : applicable_agents(p, index, pop, mv, log)) {
    StateDelta d = apply_policy(p, pop[static_cast<std::size_t>(id)], mv, model());
    pop[static_cast<std::size_t>(id)].vars[d.variable] = d.after;
    log.record(index, id, tick);
  }
}

}  // namespace

TEST_CASE("subsidy policy parses") {
  Policy p = parse_policy(kSubsidy);
  CHECK(p.name == "insurance-subsidy");
  CHECK(p.target_agent_type == "Migrant");
  CHECK(p.action.op == ActionOp::Multiply);
  CHECK(p.action.variable == "insurance_cost");
  CHECK(p.mode == PolicyMode::Once);
  CHECK(check_policy(p, model()).ok());
  CHECK(parse_policy(policy_to_json(p)) == p);
}

TEST_CASE("policy schema errors") {
  CHECK(policy_error(R"({"name":"p","target_agent_type":"Migrant","condition":"true","action":{"op":"divide","variable":"income","operand":"2"}})") ==
        "UNKNOWN_OP");
  CHECK(policy_error(R"({"name":"p","target_agent_type":"Migrant","condition":"true","action":{"op":"set","variable":"income","operand":"2"},"mode":"sometimes"})") ==
        "UNKNOWN_MODE");
  CHECK(policy_error(R"({"name":"p","condition":"true","action":{"op":"set","variable":"income","operand":"2"}})") ==
        "SCHEMA_VIOLATION");
  CHECK(policy_error(R"({"name":"p","target_agent_type":"Migrant","condition":"1 +","action":{"op":"set","variable":"income","operand":"2"}})") ==
        "SYNTAX_ERROR");
}

TEST_CASE("policy checks against the model") {
  CHECK(check_policy(policy("Ghost", "true", "set", "x", "1"), model()).has_error("UNKNOWN_TYPE"));
  CHECK(check_policy(policy("Migrant", "true", "set", "salary", "1"), model()).has_error("UNKNOWN_VARIABLE"));
  CHECK(check_policy(policy("Migrant", "agent.incom > 1", "set", "income", "1"), model()).has_error("UNBOUND_VARIABLE"));
  CHECK(check_policy(policy("Migrant", "agent.income", "set", "income", "1"), model()).has_error("TYPE_MISMATCH"));
  CHECK(check_policy(policy("Migrant", "true", "add", "has_job", "1"), model()).has_error("TYPE_MISMATCH"));
  CHECK(check_policy(policy("Migrant", "true", "set", "has_job", "true"), model()).ok());
  CHECK(check_policy(policy("Migrant", "agent.vacancies > 0", "set", "income", "1"), model()).has_error("UNBOUND_VARIABLE"));
}

TEST_CASE("applicable agents") {
  std::vector<AgentState> pop{migrant(0, 20000), migrant(1, 30000), migrant(2, 40000)};
  PolicyApplicationLog log;
  Policy p = parse_policy(kSubsidy);
  CHECK(applicable_agents(p, 0, pop, {}, log) == std::vector<AgentId>{0});
  CHECK(applicable_agents(policy("Migrant", "false", "set", "income", "1"), 0, pop, {}, log).empty());
  CHECK(applicable_agents(policy("Migrant", "true", "set", "income", "1"), 0, pop, {}, log).size() == 3);
  CHECK(applicable_agents(policy("Employer", "true", "set", "vacancies", "1"), 0, pop, {}, log).empty());
}

TEST_CASE("once policies apply once per agent") {
  std::vector<AgentState> pop{migrant(0, 1000), migrant(1, 2000)};
  Policy p = policy("Migrant", "true", "multiply", "insurance_cost", "0.5");
  PolicyApplicationLog log;
  apply_all(p, 0, pop, {}, log, 1);
  CHECK(log.count(0, 1) == 2);
  CHECK(applicable_agents(p, 0, pop, {}, log).empty());
  apply_all(p, 0, pop, {}, log, 2);
  CHECK(log.count(0, 2) == 0);
  CHECK(log.total(0) == 2);
  CHECK(pop[0].vars["insurance_cost"] == Value(500));
}

TEST_CASE("continuous multiply compounds") {
  std::vector<AgentState> pop{migrant(0, 1000)};
  Policy p = policy("Migrant", "true", "multiply", "insurance_cost", "0.5", "continuous");
  PolicyApplicationLog log;
  for (int t = 0; t < 3; ++t) apply_all(p, 0, pop, {}, log, t);
  CHECK(pop[0].vars["insurance_cost"] == Value(125));
  CHECK(log.total(0) == 3);
}

TEST_CASE("apply_policy arithmetic") {
  VarMap mv{{"minimum_wage", 12.70}};
  CHECK(apply_policy(parse_policy(kSubsidy), migrant(0, 20000, 1000), mv, model()).after == Value(500));
  CHECK(apply_policy(policy("Migrant", "true", "add", "rent", "0"), migrant(0, 1), mv, model()).after == Value(800));
  StateDelta wage = apply_policy(policy("Migrant", "true", "set", "income", "model.minimum_wage * 40 * 52"),
                                 migrant(0, 1), mv, model());
  CHECK(wage.after == Value(26416));
  CHECK(wage.before == Value(1));
  StateDelta self = apply_policy(policy("Migrant", "true", "set", "income", "agent.income * 2"), migrant(4, 300), mv,
                                 model());
  CHECK(self.agent == 4);
  CHECK(self.after == Value(600));
  StateDelta capped = apply_policy(policy("Migrant", "true", "multiply", "insurance_cost", "100"), migrant(0, 1), mv,
                                   model());
  CHECK(capped.after == Value(5000));
  CHECK(capped.clamped);
}

TEST_CASE("policies with disjoint write sets commute") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> income(5000, 60000);
  const std::vector<Policy> candidates{
      policy("Migrant", "agent.income < 30000", "multiply", "insurance_cost", "0.5"),
      policy("Migrant", "agent.income > 20000", "add", "rent", "agent.income / 1000"),
      policy("Migrant", "agent.income > 40000", "set", "has_job", "true"),
      policy("Employer", "true", "add", "vacancies", "2")};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<AgentState> pop;
    for (AgentId i = 0; i < 20; ++i) pop.push_back(migrant(i, income(rng), income(rng) / 40));
    pop.push_back({20, "Employer", {{"vacancies", 3.0}}});
    const std::size_t a = rng() % 4;
    std::size_t b = rng() % 3;
    if (b >= a) ++b;
    auto run = [&](std::size_t first, std::size_t second) {
      std::vector<AgentState> p = pop;
      PolicyApplicationLog log;
      apply_all(candidates[first], first, p, {}, log, 0);
      apply_all(candidates[second], second, p, {}, log, 0);
      return p;
    };
    CHECK(run(a, b) == run(b, a));
  }
}
