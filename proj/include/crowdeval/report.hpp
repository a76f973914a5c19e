#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crowdeval/event_log.hpp"
#include "crowdeval/scoring.hpp"
#include "crowdeval/svg.hpp"
#include "crowdeval/types.hpp"
#include "crowdeval/util.hpp"

namespace crowdeval {

struct ReportResult {
  std::filesystem::path dir;
  std::vector<std::filesystem::path> files;
};

namespace report_detail {

inline void write_file(ReportResult& result, const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report file: " + path.string());
  out << content;
  result.files.push_back(path);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::string leaderboard_csv(
    const Leaderboard& board,
    const std::map<std::string, std::string>& display_names) {
  std::string out = "rank,model_id,display_name,aggregate,rounds_counted,tied\n";
  for (const auto& e : board.entries) {
    auto it = display_names.find(e.model_id);
    out += std::to_string(e.rank) + "," + csv_escape(e.model_id) + "," +
           csv_escape(it != display_names.end() ? it->second : e.model_id) + "," +
           (e.scored ? format_double(e.aggregate) : std::string("")) + "," +
           std::to_string(e.rounds_counted) + "," + (e.tied ? "true" : "false") +
           "\n";
  }
  return out;
}

inline std::string score_matrix_csv(const Round& round) {
  ScoreMatrix matrix = score_matrix(round);
  std::set<std::string> answerers;
  for (auto& [answerer, artifact] : round.answers) answerers.insert(answerer);
  std::string out = "evaluator";
  for (const auto& a : answerers) out += "," + csv_escape(a);
  out += "\n";
  for (auto& [evaluator, row] : matrix.cells) {
    out += csv_escape(evaluator);
    for (const auto& a : answerers) {
      auto it = row.find(a);
      out += ",";
      if (it != row.end()) out += format_double(it->second);
    }
    out += "\n";
  }
  return out;
}

struct RunData {
  ReplayResult replay;
  std::filesystem::path log_path;
  std::vector<Round> rounds;  // completed only
};

inline double round_score_mean(const Round& round) {
  double sum = 0.0;
  for (auto& [model, score] : round.round_scores) sum += score;
  return round.round_scores.empty() ? 0.0
                                    : sum / round.round_scores.size();
}

}  // namespace report_detail

/// Regenerate the full report bundle from event logs. Everything is
/// recomputed via replay; nothing cached in the logs is trusted without
/// verification (replay itself cross-checks scores and leaderboards).
inline ReportResult generate_report(
    const std::vector<std::filesystem::path>& log_paths,
    const std::filesystem::path& out_dir) {
  namespace rd = report_detail;
  if (log_paths.empty()) throw ConfigError("report: no event logs given");

  std::vector<rd::RunData> runs;
  for (const auto& path : log_paths) {
    rd::RunData data;
    data.replay = replay(path);
    data.log_path = path;
    data.rounds = data.replay.state.completed_rounds;
    runs.push_back(std::move(data));
  }
  std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    return a.replay.header.run_index < b.replay.header.run_index;
  });
  const LogHeader& head = runs.front().replay.header;
  std::set<int> seen_runs;
  for (const auto& run : runs) {
    if (run.replay.header.config_digest != head.config_digest)
      throw ConfigMismatchError("report: logs come from different configurations (" +
                                run.log_path.string() + ")");
    if (!seen_runs.insert(run.replay.header.run_index).second)
      throw ConfigMismatchError("report: duplicate run_index " +
                                std::to_string(run.replay.header.run_index));
  }

  const std::vector<std::string>& roster = head.model_ids;
  std::map<std::string, std::string> display_names;
  for (const auto& id : roster) display_names[id] = id;
  if (head.config.contains("models"))
    for (const auto& m : head.config["models"])
      display_names[m.value("model_id", "")] = m.value("display_name", "");

  std::vector<int> k_values;
  if (head.config.contains("consistency_k"))
    for (const auto& k : head.config["consistency_k"])
      k_values.push_back(k.get<int>());
  if (k_values.empty())
    k_values.push_back(std::max(1, static_cast<int>(roster.size()) / 2));

  ReportResult result;
  result.dir = out_dir;
  std::filesystem::create_directories(out_dir);

  const std::string generator_comment = std::string("generator: ") +
                                        (head.engine_version.empty()
                                             ? "crowdeval"
                                             : head.engine_version);

  // ---- leaderboards ----
  std::vector<Leaderboard> boards;
  std::vector<std::vector<Round>> rounds_per_run;
  for (const auto& run : runs) {
    boards.push_back(final_leaderboard(run.rounds, roster));
    rounds_per_run.push_back(run.rounds);
  }
  Leaderboard merged = merge_leaderboards(boards, roster);

  rd::write_file(result, out_dir / "leaderboard.csv",
                 rd::leaderboard_csv(merged, display_names));
  {
    json j;
    j["experiment"] = head.experiment;
    j["config_digest"] = head.config_digest;
    j["merged"] = leaderboard_to_json(merged);
    json per_run = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      json entry;
      entry["run_index"] = runs[i].replay.header.run_index;
      entry["leaderboard"] = leaderboard_to_json(boards[i]);
      per_run.push_back(std::move(entry));
    }
    j["per_run"] = std::move(per_run);
    rd::write_file(result, out_dir / "leaderboard.json", j.dump(2) + "\n");
  }

  // ---- per-run appendices ----
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::filesystem::path run_dir =
        out_dir / ("run_" + std::to_string(runs[i].replay.header.run_index));
    std::filesystem::create_directories(run_dir);
    rd::write_file(result, run_dir / "leaderboard.csv",
                   rd::leaderboard_csv(boards[i], display_names));
    for (const auto& round : runs[i].rounds) {
      if (round.skipped) continue;
      rd::write_file(result,
                     run_dir / ("scores_round_" +
                                std::to_string(round.round_index) + ".csv"),
                     rd::score_matrix_csv(round));
    }
  }

  // ---- consistency (top-k + dispersion) ----
  {
    json j;
    j["definition"] =
        "top_k: per round, each evaluator's top-k answer set by its own "
        "scores (ties broken by presented label); the round value is the "
        "mean over unordered evaluator pairs of |topk_i intersect topk_j| / k. "
        "per_round_mean averages round values (primary); pooled weights "
        "rounds by their evaluator-pair count.";
    json top_k = json::object();
    for (int k : k_values) {
      double value_sum = 0.0;
      int value_rounds = 0;
      double pooled_sum = 0.0;
      double pooled_pairs = 0.0;
      json per_run = json::array();
      for (std::size_t i = 0; i < runs.size(); ++i) {
        json rounds = json::object();
        double run_sum = 0.0;
        int run_rounds = 0;
        for (const auto& round : runs[i].rounds) {
          json value;  // null unless computable
          if (!round.skipped) {
            try {
              double v = top_k_consistency(round, k);
              value = v;
              value_sum += v;
              value_rounds += 1;
              run_sum += v;
              run_rounds += 1;
              std::size_t evaluators = evaluator_scores(round).size();
              double pairs =
                  static_cast<double>(evaluators * (evaluators - 1)) / 2.0;
              pooled_sum += v * pairs;
              pooled_pairs += pairs;
            } catch (const InsufficientDataError&) {
            }
          }
          rounds[std::to_string(round.round_index)] = value;
        }
        json entry;
        entry["run_index"] = runs[i].replay.header.run_index;
        entry["rounds"] = std::move(rounds);
        entry["mean"] = run_rounds ? json(run_sum / run_rounds) : json();
        per_run.push_back(std::move(entry));
      }
      json kj;
      kj["per_round_mean"] =
          value_rounds ? json(value_sum / value_rounds) : json();
      kj["pooled"] = pooled_pairs > 0 ? json(pooled_sum / pooled_pairs) : json();
      kj["rounds_counted"] = value_rounds;
      kj["per_run"] = std::move(per_run);
      top_k[std::to_string(k)] = std::move(kj);
    }
    j["top_k"] = std::move(top_k);

    std::vector<const Round*> all_rounds;
    for (const auto& run : runs)
      for (const auto& round : run.rounds)
        if (!round.skipped) all_rounds.push_back(&round);
    if (auto summary = dispersion_summary(all_rounds)) {
      j["per_answer_stddev"] = json{{"answers", summary->answers},
                                    {"min", summary->min},
                                    {"max", summary->max},
                                    {"mean", summary->mean}};
    } else {
      j["per_answer_stddev"] = json();
    }
    rd::write_file(result, out_dir / "consistency.json", j.dump(2) + "\n");
  }

  // ---- dual-axis metrics ----
  std::map<std::string, DualAxis> merged_axes =
      dual_axis_metrics(rounds_per_run, roster);
  {
    json models = json::object();
    for (const auto& id : roster) {
      const DualAxis& axis = merged_axes[id];
      models[id] = json{
          {"solving", axis.solving ? json(*axis.solving) : json()},
          {"difficulty", axis.difficulty ? json(*axis.difficulty) : json()}};
    }
    json per_run = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      auto axes = dual_axis_metrics({runs[i].rounds}, roster);
      json run_models = json::object();
      for (const auto& id : roster) {
        run_models[id] = json{
            {"solving", axes[id].solving ? json(*axes[id].solving) : json()},
            {"difficulty",
             axes[id].difficulty ? json(*axes[id].difficulty) : json()}};
      }
      per_run.push_back(json{{"run_index", runs[i].replay.header.run_index},
                             {"models", std::move(run_models)}});
    }
    json j;
    j["definition"] =
        "solving: the model's merged leaderboard aggregate (its mean score "
        "on other models' questions). difficulty: mean over the model's "
        "questioner rounds of the answerers' mean round score; lower means "
        "a harder question.";
    j["models"] = std::move(models);
    j["per_run"] = std::move(per_run);
    rd::write_file(result, out_dir / "dual_axis.json", j.dump(2) + "\n");
  }

  // ---- radar ----
  {
    // merged: one axis per round index present in any run; value = mean
    // across runs of the model's round score
    int max_round = -1;
    for (const auto& run : runs)
      for (const auto& round : run.rounds)
        max_round = std::max(max_round, round.round_index);

    std::vector<int> axes;            // round indices that appear
    std::vector<int> omitted_rounds;  // skipped everywhere
    for (int r = 0; r <= max_round; ++r) {
      bool any_scored = false, any_seen = false;
      for (const auto& run : runs)
        for (const auto& round : run.rounds)
          if (round.round_index == r) {
            any_seen = true;
            if (!round.skipped) any_scored = true;
          }
      if (any_scored)
        axes.push_back(r);
      else if (any_seen)
        omitted_rounds.push_back(r);
    }

    std::vector<std::string> axis_labels;
    for (int r : axes) axis_labels.push_back("Q" + std::to_string(r + 1));

    std::vector<svg::RadarSeries> series;
    for (const auto& id : roster) {
      svg::RadarSeries s;
      s.name = display_names.count(id) ? display_names[id] : id;
      for (std::size_t axis = 0; axis < axes.size(); ++axis) {
        double sum = 0.0;
        int count = 0;
        for (const auto& run : runs)
          for (const auto& round : run.rounds)
            if (round.round_index == axes[axis] && round.round_scores.count(id)) {
              sum += round.round_scores.at(id);
              count += 1;
            }
        if (count > 0) s.values[static_cast<int>(axis)] = sum / count;
      }
      series.push_back(std::move(s));
    }
    std::string footnote;
    if (!omitted_rounds.empty()) {
      footnote = "omitted (skipped) rounds:";
      for (int r : omitted_rounds) footnote += " Q" + std::to_string(r + 1);
    }
    rd::write_file(result, out_dir / "radar.svg",
                   svg::radar_chart(axis_labels, series,
                                    head.experiment + ": per-question scores",
                                    footnote, generator_comment));

    for (std::size_t i = 0; i < runs.size(); ++i) {
      std::filesystem::path run_dir =
          out_dir / ("run_" + std::to_string(runs[i].replay.header.run_index));
      std::vector<std::string> labels;
      std::vector<int> run_axes;
      std::string run_footnote;
      for (const auto& round : runs[i].rounds) {
        if (round.skipped) {
          if (run_footnote.empty()) run_footnote = "omitted (skipped) rounds:";
          run_footnote += " Q" + std::to_string(round.round_index + 1);
          continue;
        }
        run_axes.push_back(round.round_index);
        labels.push_back("Q" + std::to_string(round.round_index + 1));
      }
      std::vector<svg::RadarSeries> run_series;
      for (const auto& id : roster) {
        svg::RadarSeries s;
        s.name = display_names.count(id) ? display_names[id] : id;
        for (std::size_t axis = 0; axis < run_axes.size(); ++axis)
          for (const auto& round : runs[i].rounds)
            if (round.round_index == run_axes[axis] &&
                round.round_scores.count(id))
              s.values[static_cast<int>(axis)] = round.round_scores.at(id);
        run_series.push_back(std::move(s));
      }
      rd::write_file(
          result, run_dir / "radar.svg",
          svg::radar_chart(labels, run_series,
                           head.experiment + " run " +
                               std::to_string(runs[i].replay.header.run_index),
                           run_footnote, generator_comment));
    }
  }

  // ---- dual-axis scatter ----
  {
    std::vector<svg::ScatterPoint> points;
    for (const auto& id : roster) {
      const DualAxis& axis = merged_axes[id];
      if (!axis.solving || !axis.difficulty) continue;
      points.push_back({display_names.count(id) ? display_names[id] : id,
                        *axis.solving, *axis.difficulty});
    }
    rd::write_file(
        result, out_dir / "dual_axis.svg",
        svg::scatter_chart(points, head.experiment + ": solving vs difficulty",
                           "own mean score on others' questions",
                           "others' mean score on own questions",
                           generator_comment));
  }

  // ---- provenance ----
  {
    json logs = json::array();
    for (const auto& run : runs) {
      json ranges = json::object();
      for (auto& [round_index, range] : run.replay.round_seq_ranges)
        ranges[std::to_string(round_index)] =
            json::array({range.first, range.second});
      logs.push_back(json{{"file", run.log_path.filename().string()},
                          {"run_index", run.replay.header.run_index},
                          {"config_digest", run.replay.header.config_digest},
                          {"events", run.replay.event_count},
                          {"round_seq_ranges", std::move(ranges)}});
    }
    json per_model = json::object();
    for (const auto& id : roster) {
      json uses = json::array();
      for (const auto& run : runs) {
        json rounds = json::array();
        for (const auto& round : run.rounds)
          if (round.round_scores.count(id)) rounds.push_back(round.round_index);
        uses.push_back(json{{"run_index", run.replay.header.run_index},
                            {"scored_rounds", std::move(rounds)}});
      }
      per_model[id] = std::move(uses);
    }
    json j;
    j["generator"] = head.engine_version;
    j["experiment"] = head.experiment;
    j["config_digest"] = head.config_digest;
    j["note"] =
        "every report number is recomputed by replaying the logs below; a "
        "model's aggregate uses the round_scored events inside the listed "
        "rounds' seq ranges; consistency and dual-axis metrics use the "
        "phase-3 artifact_validated events in the same ranges. round index "
        "-1 ranges cover run-scoped events.";
    j["logs"] = std::move(logs);
    j["leaderboard_sources"] = std::move(per_model);
    rd::write_file(result, out_dir / "provenance.json", j.dump(2) + "\n");
  }

  return result;
}

}  // namespace crowdeval
