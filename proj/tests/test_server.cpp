#include <doctest.h>
#include <httplib.h>

#include <chrono>
#include <thread>

#include "facetsim/archive.hpp"
#include "facetsim/server.hpp"
#include "facetsim/workspace.hpp"
#include "support.hpp"

using namespace facetsim;
using nlohmann::json;
using testing::TempDir;

namespace {

const std::string kSubsidy = R"({
  "name": "insurance-subsidy",
  "target_agent_type": "Migrant",
  "condition": "agent.income < 30000",
  "action": {"op": "multiply", "variable": "insurance_cost", "operand": "0.5"},
  "mode": "once"
})";

/// A demo workspace copy served on a free local port.
class Fixture {
 public:
  Fixture() {
    testing::copy_demo(dir_.path());
    std::filesystem::remove(dir_ / "policies/insurance-subsidy.json");
    server_ = std::make_unique<ApiServer>(dir_.path());
    port_ = server_->bind("127.0.0.1", 0);
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_->serve(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30, 0);
    for (int i = 0; i < 200 && !client_->Get("/facets"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ~Fixture() {
    server_->stop();
    thread_.join();
    server_->wait_for_jobs();
  }

  httplib::Client& http() { return *client_; }
  const TempDir& dir() const { return dir_; }
  Workspace workspace() const { return Workspace(dir_.path()); }

  json wait_done(const std::string& id) {
    for (int i = 0; i < 3000; ++i) {
      auto r = http().Get("/runs/" + id);
      REQUIRE(r);
      json status = json::parse(r->body);
      if (status["state"] == "done" || status["state"] == "failed") return status;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    FAIL("run did not finish");
    return {};
  }

 private:
  TempDir dir_;
  std::unique_ptr<ApiServer> server_;
  int port_ = -1;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

std::string etag(const std::string& bytes) { return "\"" + sha256_hex(bytes) + "\""; }

}  // namespace

TEST_CASE("facets") {
  Fixture f;
  auto r = f.http().Get("/facets");
  REQUIRE(r);
  CHECK(r->status == 200);
  json body = json::parse(r->body);
  CHECK(body["facets"].size() == 8);
  CHECK(body["report"]["ok"] == true);
}

TEST_CASE("policies") {
  Fixture f;
  auto created = f.http().Post("/policies", kSubsidy, "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(json::parse(created->body) == policy_to_json(parse_policy(kSubsidy)));
  CHECK(f.workspace().exists("policies/insurance-subsidy.json"));

  CHECK(f.http().Post("/policies", kSubsidy, "application/json")->status == 409);
  auto listed = f.http().Get("/policies");
  CHECK(json::parse(listed->body).size() == 1);

  auto bad = f.http().Post("/policies", R"({"name":"x","target_agent_type":"Migrant","condition":"true","action":{"op":"divide","variable":"income","operand":"2"},"mode":"once"})",
                           "application/json");
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["errors"][0]["code"] == "UNKNOWN_OP");
  auto unknown_var = f.http().Post("/policies", R"({"name":"y","target_agent_type":"Migrant","condition":"agent.incom < 1","action":{"op":"set","variable":"income","operand":"2"},"mode":"once"})",
                                   "application/json");
  CHECK(unknown_var->status == 400);
  CHECK(json::parse(unknown_var->body)["errors"][0]["code"] == "UNBOUND_VARIABLE");

  json changed = json::parse(kSubsidy);
  changed["action"]["operand"] = "0.25";
  const std::string current = f.workspace().read("policies/insurance-subsidy.json");
  CHECK(f.http().Put("/policies/insurance-subsidy", {{"If-Match", "\"stale\""}}, changed.dump(), "application/json")->status == 409);
  CHECK(f.http().Put("/policies/insurance-subsidy", {{"If-Match", etag(current)}}, changed.dump(), "application/json")->status == 200);
  CHECK(parse_policy(f.workspace().read("policies/insurance-subsidy.json")).action.operand == parse_expression("0.25"));
  changed["name"] = "other";
  CHECK(f.http().Put("/policies/insurance-subsidy", changed.dump(), "application/json")->status == 400);
  CHECK(f.http().Put("/policies/nope", changed.dump(), "application/json")->status == 404);

  CHECK(f.http().Delete("/policies/insurance-subsidy")->status == 204);
  CHECK(f.http().Delete("/policies/insurance-subsidy")->status == 404);
}

TEST_CASE("flows") {
  Fixture f;
  auto citizen = f.http().Get("/flows/Citizen");
  REQUIRE(citizen);
  CHECK(citizen->status == 200);
  CHECK(citizen->body == testing::slurp(testing::kDemo / "flows/Citizen.graphml"));
  CHECK(citizen->get_header_value("ETag") == etag(citizen->body));
  CHECK(f.http().Get("/flows/Dragon")->status == 404);

  auto cyclic = f.http().Put("/flows/Migrant", testing::slurp(testing::kFixtures / "cyclic_flow.graphml"), "application/xml");
  CHECK(cyclic->status == 400);
  json report = json::parse(cyclic->body);
  CHECK(report["ok"] == false);
  CHECK(report["errors"][0]["code"] == "CYCLE");
  CHECK(!f.workspace().exists("flows/Migrant.graphml"));

  const std::string skeleton = emit_skeleton_flow("Citizen", {"grow-needs"});
  CHECK(f.http().Put("/flows/Citizen", {{"If-Match", "\"stale\""}}, skeleton, "application/xml")->status == 409);
  auto put = f.http().Put("/flows/Citizen", {{"If-Match", citizen->get_header_value("ETag")}}, skeleton, "application/xml");
  CHECK(put->status == 200);
  CHECK(put->get_header_value("ETag") == etag(skeleton));
  CHECK(f.workspace().read("flows/Citizen.graphml") == skeleton);
  CHECK(f.http().Put("/flows/Migrant", skeleton, "application/xml")->status == 400);  // wrong agent type
}

TEST_CASE("scenarios share the CLI validator") {
  Fixture f;
  auto listed = f.http().Get("/scenarios");
  CHECK(json::parse(listed->body).size() == 5);

  json doc = json::parse(testing::slurp(testing::kDemo / "scenarios/driving-license.json"));
  doc["name"] = "no-flow";
  doc["flow_bindings"] = json::object();
  auto rejected = f.http().Post("/scenarios", doc.dump(), "application/json");
  CHECK(rejected->status == 400);
  CHECK(json::parse(rejected->body) == to_json(validate_scenario_document(doc.dump(), f.workspace())));
  CHECK(json::parse(rejected->body)["errors"][0]["code"] == "MISSING_FLOW");

  doc = json::parse(testing::slurp(testing::kDemo / "scenarios/driving-license.json"));
  doc["name"] = "driving-copy";
  auto created = f.http().Post("/scenarios", doc.dump(), "application/json");
  CHECK(created->status == 201);
  CHECK(json::parse(created->body)["id"] == "driving-copy");
  CHECK(f.http().Post("/scenarios", doc.dump(), "application/json")->status == 409);
}

TEST_CASE("runs match the CLI") {
  Fixture f;
  auto started = f.http().Post("/runs", R"({"scenario":"document-procurement","seed":42})", "application/json");
  REQUIRE(started);
  CHECK(started->status == 202);
  const std::string id = json::parse(started->body)["id"];
  CHECK(id == "1");
  json status = f.wait_done(id);
  CHECK(status["state"] == "done");
  CHECK(status["progress"]["ticks_completed"] == 60);
  CHECK(status["progress"]["ticks_total"] == 60);

  auto metrics = f.http().Get("/runs/" + id + "/metrics");
  REQUIRE(metrics);
  CHECK(metrics->status == 200);
  json series = json::parse(metrics->body)["series"];

  TempDir out;
  auto cli = testing::run_command(testing::quote(FACETSIM_CLI) + " run --scenario " +
                                  testing::quote(f.dir() / "scenarios/document-procurement.json") + " --seed 42 --out " +
                                  testing::quote(out.path()));
  REQUIRE(cli.exit_code == 0);
  std::string dir = cli.out.substr(0, cli.out.find('\n'));
  MetricTable table = parse_metrics_csv(testing::slurp(std::filesystem::path(dir) / "metrics.csv"));
  CHECK(series == metric_series_json(table.names, table.rows));

  const std::string archive = status["archive"];
  auto by_archive = f.http().Get("/runs/" + archive + "/metrics");
  CHECK(by_archive->status == 200);
  CHECK(json::parse(by_archive->body)["series"] == series);
}

TEST_CASE("run errors and comparison") {
  Fixture f;
  CHECK(f.http().Post("/runs", R"({"scenario":"missing"})", "application/json")->status == 404);
  CHECK(f.http().Post("/runs", R"({"seed":1})", "application/json")->status == 400);
  CHECK(f.http().Post("/runs", R"({"scenario":"lockdown","seed":-1})", "application/json")->status == 400);
  CHECK(f.http().Get("/runs/77")->status == 404);
  CHECK(f.http().Get("/runs/77/metrics")->status == 404);

  // the subsidy policy was removed from this workspace, so loading fails
  auto invalid = f.http().Post("/runs", R"({"scenario":"insurance-subsidy"})", "application/json");
  CHECK(invalid->status == 400);
  CHECK(json::parse(invalid->body)["errors"][0]["code"] == "MISSING_FILE");

  json broken = json::parse(testing::slurp(testing::kDemo / "scenarios/lockdown.json"));
  broken["name"] = "broken";
  broken["policies"] = json::array({json::parse(
      R"json({"name":"zero","target_agent_type":"Citizen","condition":"true","action":{"op":"set","variable":"outings","operand":"1 / (agent.outings - agent.outings)"},"mode":"once"})json")});
  f.workspace().write("scenarios/broken.json", broken.dump());
  const std::string failed_id = json::parse(f.http().Post("/runs", R"({"scenario":"broken"})", "application/json")->body)["id"];
  json failed = f.wait_done(failed_id);
  CHECK(failed["state"] == "failed");
  CHECK(failed["error"]["code"] == "DIVISION_BY_ZERO");
  CHECK(f.http().Get("/runs/" + failed_id + "/metrics")->status == 409);

  std::vector<std::string> ids;
  for (const char* seed : {"1", "2"}) {
    auto r = f.http().Post("/runs", std::string(R"({"scenario":"lockdown","seed":)") + seed + "}", "application/json");
    ids.push_back(json::parse(r->body)["id"]);
  }
  for (const auto& id : ids) CHECK(f.wait_done(id)["state"] == "done");
  auto cmp = f.http().Get("/compare?runs=" + ids[0] + "," + ids[1]);
  REQUIRE(cmp);
  CHECK(cmp->status == 200);
  json c = json::parse(cmp->body);
  CHECK(c["runs"] == json::array({ids[0], ids[1]}));
  CHECK(c["csv"].get<std::string>().starts_with("tick,mean_food_need@" + ids[0]));
  auto single = f.http().Get("/compare?runs=" + ids[0]);
  CHECK(single->status == 400);
  CHECK(json::parse(single->body)["errors"][0]["code"] == "NEED_TWO_RUNS");
  CHECK(f.http().Get("/compare?runs=" + ids[0] + ",404")->status == 404);
}
