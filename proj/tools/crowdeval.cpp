#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdeval/crowdeval.hpp"

namespace {

using namespace crowdeval;

void print_leaderboard(const Leaderboard& board, const RunConfig& config) {
  std::map<std::string, std::string> names;
  for (const auto& m : config.models) names[m.model_id] = m.display_name;
  std::printf("  %-4s %-24s %-12s %s\n", "rank", "model", "score", "rounds");
  for (const auto& e : board.entries) {
    char value[32];
    std::snprintf(value, sizeof(value), "%.2f", e.aggregate);
    std::string score = e.scored ? value : "unscored";
    if (e.tied) score += " (tied)";
    std::printf("  %-4d %-24s %-12s %d\n", e.rank,
                names.count(e.model_id) ? names[e.model_id].c_str()
                                        : e.model_id.c_str(),
                score.c_str(), e.rounds_counted);
  }
}

int cmd_validate(const std::string& config_path, bool probe) {
  RunConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  ConfigReport report = validate_config(config);
  for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
  for (const auto& e : report.errors) std::cout << "error: " << e << "\n";
  if (!report.ok()) {
    std::cout << "configuration invalid (" << report.errors.size()
              << " error(s))\n";
    return 2;
  }
  if (probe) {
    try {
      Orchestrator orch(config);
      orch.probe_backends();
      std::cout << "backend probe: all reachable\n";
    } catch (const Error& e) {
      std::cout << "error: " << e.what() << "\n";
      return 2;
    }
  }
  std::cout << "configuration valid: " << config.n() << " models, domain "
            << config.domain_id << ", " << config.num_runs << " run(s), seed "
            << config.seed << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, bool resume, bool mock,
            int runs_override, const std::string& output_override,
            std::uint64_t seed_override, bool has_seed_override) {
  RunConfig config = load_config(config_path);
  if (runs_override > 0) config.num_runs = runs_override;
  if (!output_override.empty()) config.output_dir = output_override;
  if (has_seed_override) {
    config.seed = seed_override;
    config.seed_was_generated = false;
  }
  if (mock) force_mock_backends(config);

  for (const auto& w : validate_config(config).warnings)
    std::cout << "warning: " << w << "\n";

  Hooks hooks;
  hooks.info = [](const std::string& line) { std::cout << line << "\n"; };
  hooks.on_leaderboard = [&](int run, int round, const Leaderboard& board) {
    std::cout << "run " << run << " round " << round << " standings:\n";
    print_leaderboard(board, config);
  };

  Orchestrator orch(std::move(config), std::move(hooks));
  RunResult result = orch.run(resume);

  std::cout << "\nfinal merged leaderboard (" << result.runs.size()
            << " run(s)):\n";
  print_leaderboard(result.merged, orch.config());

  std::vector<std::filesystem::path> logs;
  for (const auto& run : result.runs) logs.push_back(run.log_path);
  std::filesystem::path report_dir =
      std::filesystem::path(orch.config().output_dir) / "report";
  ReportResult report = generate_report(logs, report_dir);
  std::cout << "\nreport bundle: " << report.dir.string() << " ("
            << report.files.size() << " files)\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& log_paths,
               const std::string& out_dir) {
  std::vector<std::filesystem::path> paths(log_paths.begin(), log_paths.end());
  ReportResult result = generate_report(paths, out_dir);
  std::cout << "report bundle: " << result.dir.string() << "\n";
  for (const auto& f : result.files)
    std::cout << "  " << f.lexically_relative(result.dir).string() << "\n";
  return 0;
}

int cmd_replay(const std::vector<std::string>& log_paths) {
  int failures = 0;
  for (const auto& path : log_paths) {
    try {
      ReplayResult rep = replay(path);
      std::cout << path << ": ok (run " << rep.header.run_index << ", "
                << rep.event_count << " events, "
                << rep.state.completed_rounds.size() << " completed round(s)"
                << (rep.state.run_completed ? ", run complete" : ", run incomplete")
                << ")\n";
      std::cout << "  leaderboard:\n";
      for (const auto& e : rep.state.interim_leaderboard.entries)
        std::cout << "    " << e.rank << ". " << e.model_id << "  "
                  << (e.scored ? format_double(e.aggregate)
                               : std::string("unscored"))
                  << "\n";
    } catch (const Error& e) {
      std::cout << path << ": FAILED: " << e.what() << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peer-review tournament evaluation for language models"};
  app.require_subcommand(1);

  std::string config_path;
  bool probe = false;
  auto* validate = app.add_subcommand(
      "validate", "check a configuration file; exit 0 iff valid");
  validate->add_option("-c,--config", config_path, "configuration file")
      ->required();
  validate->add_flag("--probe", probe, "ping live backends with a 1-token request");

  std::string run_config_path, run_output;
  bool resume = false, mock = false;
  int runs_override = 0;
  std::uint64_t seed_override = 0;
  auto* run = app.add_subcommand("run", "execute the tournament");
  run->add_option("-c,--config", run_config_path, "configuration file")->required();
  run->add_flag("--resume", resume, "continue from existing event logs");
  run->add_flag("--mock", mock, "replace every backend with a synthesized mock");
  run->add_option("--runs", runs_override, "override the number of runs");
  run->add_option("-o,--output", run_output, "override the output directory");
  auto* seed_opt =
      run->add_option("--seed", seed_override, "override the run seed");

  std::vector<std::string> report_logs;
  std::string report_out = "report";
  auto* report = app.add_subcommand(
      "report", "rebuild the report bundle from event logs");
  report->add_option("logs", report_logs, "event log files")->required();
  report->add_option("-o,--output", report_out, "report output directory");

  std::vector<std::string> replay_logs;
  auto* replay_cmd = app.add_subcommand(
      "replay", "verify event logs and print their reconstructed state");
  replay_cmd->add_option("logs", replay_logs, "event log files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(config_path, probe);
    if (*run)
      return cmd_run(run_config_path, resume, mock, runs_override, run_output,
                     seed_override, seed_opt->count() > 0);
    if (*report) return cmd_report(report_logs, report_out);
    if (*replay_cmd) return cmd_replay(replay_logs);
  } catch (const crowdeval::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const crowdeval::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
