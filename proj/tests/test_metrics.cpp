#include <doctest.h>

#include <random>

#include "facetsim/metrics.hpp"
#include "support.hpp"

using namespace facetsim;
using nlohmann::json;

namespace {

MetricSpec metric(const char* text) { return parse_metric(json::parse(text)); }

std::vector<AgentState> migrants(std::initializer_list<bool> jobs) {
  std::vector<AgentState> out;
  double income = 10000;
  for (bool j : jobs) {
    out.push_back({static_cast<AgentId>(out.size()), "Migrant", {{"has_job", j}, {"income", income}}});
    income += 10000;
  }
  return out;
}

std::string metric_error(const char* text) {
  try {
    metric(text);
  } catch (const Error& e) {
    return e.code();
  }
  return "no error";
}

}  // namespace

TEST_CASE("count with a filter") {
  std::vector<MetricSpec> specs{metric(R"({"name":"employed","agent_type":"Migrant","reducer":"count","filter":"agent.has_job == true"})")};
  MetricRow row = collect_metrics(specs, migrants({true, false, true}), {}, 4);
  CHECK(row.tick == 4);
  CHECK(row.values == std::vector<std::optional<double>>{2.0});
}

TEST_CASE("reducers") {
  std::vector<MetricSpec> specs{
      metric(R"({"name":"total","agent_type":"Migrant","reducer":"sum","variable":"income"})"),
      metric(R"({"name":"avg","agent_type":"Migrant","reducer":"mean","variable":"income"})"),
      metric(R"({"name":"lo","agent_type":"Migrant","reducer":"min","variable":"income"})"),
      metric(R"({"name":"hi","agent_type":"Migrant","reducer":"max","variable":"income"})"),
      metric(R"({"name":"clock","reducer":"value","variable":"tick"})")};
  MetricRow row = collect_metrics(specs, migrants({true, false, true}), {{"tick", 7}}, 7);
  CHECK(row.values == std::vector<std::optional<double>>{60000.0, 20000.0, 10000.0, 30000.0, 7.0});
}

TEST_CASE("empty sets") {
  std::vector<MetricSpec> specs{
      metric(R"({"name":"total","agent_type":"Migrant","reducer":"sum","variable":"income"})"),
      metric(R"({"name":"n","agent_type":"Migrant","reducer":"count"})"),
      metric(R"({"name":"avg","agent_type":"Migrant","reducer":"mean","variable":"income","filter":"agent.income > 1e9"})"),
      metric(R"({"name":"lo","agent_type":"Migrant","reducer":"min","variable":"income"})")};
  MetricRow empty = collect_metrics(specs, {}, {}, 0);
  CHECK(empty.values[0] == 0.0);
  CHECK(empty.values[1] == 0.0);
  CHECK(!empty.values[2]);
  CHECK(!empty.values[3]);
  MetricRow filtered = collect_metrics(specs, migrants({true}), {}, 0);
  CHECK(!filtered.values[2]);
}

TEST_CASE("other agent types are ignored") {
  std::vector<AgentState> pop = migrants({true, true});
  pop.push_back({2, "Employer", {{"has_job", true}, {"income", 1.0}}});
  std::vector<MetricSpec> specs{metric(R"({"name":"n","agent_type":"Migrant","reducer":"count"})")};
  CHECK(collect_metrics(specs, pop, {}, 0).values[0] == 2.0);
}

TEST_CASE("metric schema") {
  CHECK(metric_error(R"({"name":"x","agent_type":"Migrant","reducer":"median","variable":"income"})") == "SCHEMA_VIOLATION");
  CHECK(metric_error(R"({"name":"x","agent_type":"Migrant","reducer":"sum"})") == "SCHEMA_VIOLATION");
  CHECK(metric_error(R"({"name":"x","agent_type":"Migrant","reducer":"count","variable":"income"})") == "SCHEMA_VIOLATION");
  CHECK(metric_error(R"({"name":"x","reducer":"value"})") == "SCHEMA_VIOLATION");
  CHECK(metric_error(R"({"name":"a,b","agent_type":"Migrant","reducer":"count"})") == "SCHEMA_VIOLATION");
  MetricSpec m = metric(R"({"name":"x","agent_type":"Migrant","reducer":"mean","variable":"income","filter":"agent.has_job"})");
  CHECK(parse_metric(metric_to_json(m)) == m);
}

TEST_CASE("metric checks") {
  CompositeModel c = testing::composite({R"({"name":"F","agent_types":[{"name":"Migrant","creates_type":true,
      "state_vars":[{"name":"income","kind":"number"},{"name":"visa","kind":"text"}]}]})"});
  CHECK(check_metric(metric(R"({"name":"x","agent_type":"Migrant","reducer":"sum","variable":"income"})"), c).ok());
  CHECK(check_metric(metric(R"({"name":"x","agent_type":"Ghost","reducer":"count"})"), c).has_error("UNKNOWN_TYPE"));
  CHECK(check_metric(metric(R"({"name":"x","agent_type":"Migrant","reducer":"sum","variable":"wage"})"), c).has_error("UNKNOWN_VARIABLE"));
  CHECK(check_metric(metric(R"({"name":"x","agent_type":"Migrant","reducer":"sum","variable":"visa"})"), c).has_error("TYPE_MISMATCH"));
  CHECK(check_metric(metric(R"({"name":"x","agent_type":"Migrant","reducer":"count","filter":"agent.income"})"), c).has_error("TYPE_MISMATCH"));
  CHECK(check_metric(metric(R"({"name":"x","reducer":"value","variable":"nope"})"), c).has_error("UNKNOWN_VARIABLE"));
}

TEST_CASE("csv layout") {
  std::vector<MetricRow> rows{{0, {1.0, std::nullopt}}, {5, {0.1, 2.5}}};
  CHECK(metrics_csv({"a", "b"}, rows) == "tick,a,b\n0,1,\n5,0.1,2.5\n");
  CHECK(metrics_csv({}, {}) == "tick\n");
}

TEST_CASE("csv round trip") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  std::vector<std::string> names{"x", "y.z", "w-1"};
  std::vector<MetricRow> rows;
  for (std::int64_t t = 0; t < 200; t += 3) {
    MetricRow r{t, {}};
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (rng() % 5 == 0) r.values.push_back(std::nullopt);
      else r.values.push_back(u(rng) / static_cast<double>(1 + rng() % 1000));
    }
    rows.push_back(r);
  }
  const std::string csv = metrics_csv(names, rows);
  MetricTable table = parse_metrics_csv(csv);
  CHECK(table.names == names);
  CHECK(table.rows == rows);
  CHECK(metrics_csv(table.names, table.rows) == csv);
}

TEST_CASE("malformed csv") {
  CHECK_THROWS_AS(parse_metrics_csv("time,a\n0,1\n"), Error);
  CHECK_THROWS_AS(parse_metrics_csv("tick,a\n0,1,2\n"), Error);
  CHECK_THROWS_AS(parse_metrics_csv("tick,a\n0,abc\n"), Error);
}
