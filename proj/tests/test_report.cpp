#include <catch2/catch_amalgamated.hpp>

#include "crowdeval/orchestrator.hpp"
#include "crowdeval/report.hpp"
#include "support/helpers.hpp"
#include "support/oracle.hpp"

using namespace crowdeval;
using testsupport::TempDir;
using testsupport::add_mock_rule;
using testsupport::mock_config;
using testsupport::run_to_completion;

namespace {

std::vector<std::filesystem::path> log_paths(const RunResult& result) {
  std::vector<std::filesystem::path> out;
  for (const auto& run : result.runs) out.push_back(run.log_path);
  return out;
}

}  // namespace

TEST_CASE("report bundle structure for a 2-run experiment") {
  TempDir dir;
  auto result = run_to_completion(mock_config(4, 101, dir / "out", "math", 2));
  auto report = generate_report(log_paths(result), dir / "report");

  for (const char* name : {"leaderboard.csv", "leaderboard.json",
                           "consistency.json", "dual_axis.json", "radar.svg",
                           "dual_axis.svg", "provenance.json"})
    CHECK(std::filesystem::exists(dir / "report" / name));
  for (int run = 0; run < 2; ++run) {
    auto run_dir = dir / "report" / ("run_" + std::to_string(run));
    CHECK(std::filesystem::exists(run_dir / "leaderboard.csv"));
    CHECK(std::filesystem::exists(run_dir / "radar.svg"));
    for (int round = 0; round < 4; ++round)
      CHECK(std::filesystem::exists(
          run_dir / ("scores_round_" + std::to_string(round) + ".csv")));
  }

  // leaderboard.csv ranks align with the run result
  auto csv = testsupport::read_file(dir / "report" / "leaderboard.csv");
  auto lines = split_lines(csv);
  REQUIRE(lines.size() >= 5);
  CHECK(lines[0] == "rank,model_id,display_name,aggregate,rounds_counted,tied");
  CHECK(lines[1].rfind("1,", 0) == 0);
}

TEST_CASE("identical logs produce byte-identical bundles") {
  TempDir dir;
  auto result = run_to_completion(mock_config(3, 103, dir / "out", "programming", 2));
  auto first = generate_report(log_paths(result), dir / "report_a");
  auto second = generate_report(log_paths(result), dir / "report_b");
  REQUIRE(first.files.size() == second.files.size());
  for (std::size_t i = 0; i < first.files.size(); ++i) {
    INFO(first.files[i].string());
    CHECK(testsupport::read_file(first.files[i]) ==
          testsupport::read_file(second.files[i]));
  }
}

TEST_CASE("report numbers equal the independent oracle") {
  TempDir dir;
  auto result = run_to_completion(mock_config(5, 107, dir / "out", "math", 3));
  auto report = generate_report(log_paths(result), dir / "report");

  std::vector<oracle::Run> runs;
  for (const auto& run : result.runs)
    runs.push_back(oracle::load_run(run.log_path.string()));
  auto expected = oracle::merged_leaderboard(runs);

  json board = json::parse(
      testsupport::read_file(dir / "report" / "leaderboard.json"));
  const json& entries = board["merged"]["entries"];
  REQUIRE(entries.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(entries[i]["model_id"] == expected[i].model_id);
    if (expected[i].scored)
      CHECK_THAT(entries[i]["aggregate"].get<double>(),
                 Catch::Matchers::WithinAbs(expected[i].aggregate, 1e-9));
  }

  // dual-axis values against the oracle
  json dual = json::parse(testsupport::read_file(dir / "report" / "dual_axis.json"));
  auto oracle_axes = oracle::dual_axis(runs);
  for (auto& [model, axis] : oracle_axes) {
    const json& got = dual["models"][model];
    if (axis.solving)
      CHECK_THAT(got["solving"].get<double>(),
                 Catch::Matchers::WithinAbs(*axis.solving, 1e-9));
    if (axis.difficulty)
      CHECK_THAT(got["difficulty"].get<double>(),
                 Catch::Matchers::WithinAbs(*axis.difficulty, 1e-9));
  }

  // top-k per-round values against the oracle
  json consistency =
      json::parse(testsupport::read_file(dir / "report" / "consistency.json"));
  int k = 2;  // n=5 -> default k = 2
  const json& per_run = consistency["top_k"][std::to_string(k)]["per_run"];
  REQUIRE(per_run.size() == runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& round : runs[r].rounds) {
      auto expected_v = oracle::top_k(round, k);
      const json& got = per_run[r]["rounds"][std::to_string(round.index)];
      if (expected_v)
        CHECK_THAT(got.get<double>(),
                   Catch::Matchers::WithinAbs(*expected_v, 1e-9));
      else
        CHECK(got.is_null());
    }
  }
}

TEST_CASE("skipped rounds are footnoted and excluded from matrices") {
  TempDir dir;
  auto config = mock_config(3, 109, dir / "out");
  add_mock_rule(config, "b2",
                json{{"match", json{{"phase", 1}}},
                     {"fail", json{{"kind", "transport"}}}});  // m2's round skipped
  auto result = run_to_completion(config);
  auto report = generate_report(log_paths(result), dir / "report");

  CHECK_FALSE(std::filesystem::exists(dir / "report" / "run_0" /
                                      "scores_round_1.csv"));
  auto radar = testsupport::read_file(dir / "report" / "radar.svg");
  CHECK(contains(radar, "omitted (skipped) rounds: Q2"));

  json consistency =
      json::parse(testsupport::read_file(dir / "report" / "consistency.json"));
  CHECK(consistency["top_k"]["1"]["per_run"][0]["rounds"]["1"].is_null());
}

TEST_CASE("rounds with too little data for k are null in consistency.json") {
  TempDir dir;
  auto config = mock_config(4, 211, dir / "out");  // default k = 2
  // one answer failure in round 0 leaves answerer-evaluators with a single
  // judgeable answer, below k
  add_mock_rule(config, "b2",
                json{{"match", json{{"phase", 2}, {"round_index", 0}}},
                     {"fail", json{{"kind", "transport"}}}});
  auto result = run_to_completion(config);
  generate_report(log_paths(result), dir / "report");
  json consistency =
      json::parse(testsupport::read_file(dir / "report" / "consistency.json"));
  const json& rounds = consistency["top_k"]["2"]["per_run"][0]["rounds"];
  CHECK(rounds["0"].is_null());
  CHECK(rounds["1"].is_number());
  CHECK(rounds["2"].is_number());
  CHECK(rounds["3"].is_number());
}

TEST_CASE("mixed or duplicate logs are refused") {
  TempDir dir;
  auto a = run_to_completion(mock_config(3, 113, dir / "a"));
  auto b = run_to_completion(mock_config(3, 127, dir / "b"));

  CHECK_THROWS_AS(generate_report({a.runs[0].log_path, b.runs[0].log_path},
                                  dir / "bad"),
                  ConfigMismatchError);
  CHECK_THROWS_AS(generate_report({a.runs[0].log_path, a.runs[0].log_path},
                                  dir / "dup"),
                  ConfigMismatchError);
}

TEST_CASE("provenance covers every log with seq ranges") {
  TempDir dir;
  auto result = run_to_completion(mock_config(3, 131, dir / "out", "math", 2));
  generate_report(log_paths(result), dir / "report");
  json prov = json::parse(testsupport::read_file(dir / "report" / "provenance.json"));
  REQUIRE(prov["logs"].size() == 2);
  for (const auto& log : prov["logs"]) {
    CHECK(log["events"].get<int>() > 0);
    CHECK(log["round_seq_ranges"].size() >= 3);
    for (auto& [round, range] : log["round_seq_ranges"].items()) {
      CHECK(range[0].get<int>() >= 1);
      CHECK(range[1].get<int>() >= range[0].get<int>());
    }
  }
  for (const auto& id : {"m1", "m2", "m3"})
    CHECK(prov["leaderboard_sources"].contains(id));
}

TEST_CASE("generated SVGs are well-formed enough to trust") {
  TempDir dir;
  auto result = run_to_completion(mock_config(4, 137, dir / "out"));
  generate_report(log_paths(result), dir / "report");
  auto radar = testsupport::read_file(dir / "report" / "radar.svg");
  CHECK(radar.rfind("<svg", 0) == 0);
  CHECK(contains(radar, "generator: crowdeval"));
  CHECK(contains(radar, "</svg>"));
  CHECK(contains(radar, "<polygon"));
  CHECK(contains(radar, "Q1"));
  auto scatter = testsupport::read_file(dir / "report" / "dual_axis.svg");
  CHECK(contains(scatter, "<circle"));
  CHECK(contains(scatter, "own mean score"));
}
