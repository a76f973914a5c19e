#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>

#include "crowdeval/config.hpp"
#include "support/helpers.hpp"

using namespace crowdeval;

namespace {

json minimal_config_json(int n_models) {
  json j;
  j["experiment"] = "demo";
  j["domain"] = "math";
  j["seed"] = 1;
  j["backends"] = {{"pool", {{"kind", "mock"}, {"mock_script", {{"seed", 1}}}}}};
  json models = json::array();
  for (int i = 1; i <= n_models; ++i)
    models.push_back({{"model_id", "m" + std::to_string(i)},
                      {"backend_ref", "pool"}});
  j["models"] = models;
  return j;
}

}  // namespace

TEST_CASE("a 2-model pool is rejected") {
  RunConfig c = config_from_json(minimal_config_json(2));
  ConfigReport report = validate_config(c);
  REQUIRE_FALSE(report.ok());
  CHECK(contains(report.errors[0], "n >= 3"));
}

TEST_CASE("k = n-1 is out of range") {
  json j = minimal_config_json(4);
  j["consistency_k"] = {3};
  ConfigReport report = validate_config(config_from_json(j));
  REQUIRE_FALSE(report.ok());
  CHECK(contains(report.errors[0], "k must be in [1, n-2]"));
}

TEST_CASE("valid mock config passes with defaults filled") {
  RunConfig c = config_from_json(minimal_config_json(4));
  ConfigReport report = validate_config(c);
  CHECK(report.ok());
  CHECK(c.num_runs == 3);
  CHECK(c.effective_k() == std::vector<int>{2});  // n/2
  CHECK(c.retry.max_attempts == 3);
  CHECK(c.sampling.question.temperature == 1.0);
  CHECK(c.sampling.evaluation.temperature == 0.2);
}

TEST_CASE("duplicate model ids and dangling backend refs are caught") {
  json j = minimal_config_json(3);
  j["models"][2]["model_id"] = "m1";
  ConfigReport r1 = validate_config(config_from_json(j));
  REQUIRE_FALSE(r1.ok());
  CHECK(contains(r1.errors[0], "duplicate model_id"));

  json j2 = minimal_config_json(3);
  j2["models"][1]["backend_ref"] = "ghost";
  ConfigReport r2 = validate_config(config_from_json(j2));
  REQUIRE_FALSE(r2.ok());
  CHECK(contains(r2.errors[0], "ghost"));
}

TEST_CASE("live backends need endpoint and key env; mocks need a script") {
  json j = minimal_config_json(3);
  j["backends"]["pool"] = {{"kind", "live"}};
  ConfigReport r = validate_config(config_from_json(j));
  std::string all;
  for (const auto& e : r.errors) all += e + "\n";
  CHECK(contains(all, "endpoint_url"));
  CHECK(contains(all, "api_key_env"));

  json j2 = minimal_config_json(3);
  j2["backends"]["pool"] = {{"kind", "mock"}};
  ConfigReport r2 = validate_config(config_from_json(j2));
  REQUIRE_FALSE(r2.ok());
  CHECK(contains(r2.errors[0], "mock_script"));

  json j3 = minimal_config_json(3);
  j3["backends"]["pool"] = {{"kind", "carrier-pigeon"}};
  ConfigReport r3 = validate_config(config_from_json(j3));
  REQUIRE_FALSE(r3.ok());
  CHECK(contains(r3.errors[0], "live"));
}

TEST_CASE("missing seed is generated and flagged") {
  json j = minimal_config_json(3);
  j.erase("seed");
  RunConfig c = config_from_json(j);
  CHECK(c.seed_was_generated);
  ConfigReport report = validate_config(c);
  CHECK(report.ok());
  REQUIRE_FALSE(report.warnings.empty());
  CHECK(contains(report.warnings[0], "generated seed"));
}

TEST_CASE("env overrides beat the config file") {
  RunConfig c = config_from_json(minimal_config_json(3));
  std::map<std::string, std::string> env = {
      {"CROWDEVAL_NUM_RUNS", "5"},
      {"CROWDEVAL_SEED", "99"},
      {"CROWDEVAL_OUTPUT_DIR", "/tmp/elsewhere"},
      {"CROWDEVAL_SHUFFLE_QUESTIONERS", "true"},
  };
  apply_env_overrides(c, [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.num_runs == 5);
  CHECK(c.seed == 99);
  CHECK(c.output_dir == "/tmp/elsewhere");
  CHECK(c.shuffle_questioners);
}

TEST_CASE("config digest ignores output_dir but not semantics") {
  RunConfig a = config_from_json(minimal_config_json(3));
  RunConfig b = a;
  b.output_dir = "/somewhere/else";
  CHECK(config_digest(a) == config_digest(b));
  RunConfig c = a;
  c.seed = 123456;
  CHECK(config_digest(a) != config_digest(c));
  RunConfig d = a;
  d.models[0].display_name = "renamed";
  CHECK(config_digest(a) != config_digest(d));
}

TEST_CASE("force_mock_backends replaces live endpoints") {
  json j = minimal_config_json(3);
  j["backends"]["pool"] = {{"kind", "live"},
                           {"endpoint_url", "https://api.example.com/v1"},
                           {"api_key_env", "KEY"},
                           {"model_name", "big-model"}};
  RunConfig c = config_from_json(j);
  force_mock_backends(c);
  CHECK(validate_config(c).ok());
  CHECK(c.backends.at("pool").kind == "mock");
  CHECK(c.backends.at("pool").mock_script.has_value());
}

TEST_CASE("broken user template is caught at validation time") {
  json domain_file;
  domain_file["domain_id"] = "custom";
  domain_file["question_template"] = "round {{round_number}} with {{bogus_var}}";
  testsupport::TempDir dir;
  auto path = dir / "domain.json";
  std::ofstream(path) << domain_file.dump();
  json j = minimal_config_json(3);
  j["domain"] = "custom";
  j["domain_file"] = path.string();
  ConfigReport report = validate_config(config_from_json(j));
  REQUIRE_FALSE(report.ok());
  CHECK(contains(report.errors[0], "bogus_var"));
}
