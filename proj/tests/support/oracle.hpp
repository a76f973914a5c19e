#pragma once

// Independent straight-line recomputation of every analytic from the raw
// event log. Deliberately avoids the library's scoring/replay machinery:
// it re-reads raw response text, re-extracts the structured block with its
// own scanner, applies its own counting-based normalization and re-derives
// every aggregate with plain loops.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace oracle {

using json = nlohmann::ordered_json;

struct Evaluation {
  std::string evaluator;
  std::map<std::string, std::string> label_to_answerer;
  bool rubric = false;
  std::vector<std::string> ordering;            // ranking payloads
  std::map<std::string, double> rubric_totals;  // label -> derived total
};

struct Round {
  int index = 0;
  std::string questioner;
  bool skipped = false;
  std::map<std::string, std::string> answers;  // answerer -> text
  std::vector<Evaluation> evaluations;
  std::map<std::string, double> logged_scores;
};

struct Run {
  int run_index = 0;
  std::vector<std::string> roster;
  std::vector<Round> rounds;
};

inline std::string last_fenced_block(const std::string& text) {
  std::vector<std::string> blocks;
  std::string current;
  bool in_fence = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = text.substr(start, nl == std::string::npos
                                              ? std::string::npos
                                              : nl - start);
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line.compare(first, 3, "```") == 0) {
      if (in_fence) {
        blocks.push_back(current);
        current.clear();
      }
      in_fence = !in_fence;
    } else if (in_fence) {
      current += line;
      current += '\n';
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return blocks.empty() ? "" : blocks.back();
}

inline Run load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("oracle: cannot open " + path);
  Run run;
  std::map<int, Round> rounds;
  // (round, actor, prompt_attempt) -> raw phase-3 response text
  std::map<std::string, std::string> phase3_responses;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (!have_header) {
      run.run_index = j.at("run_index").get<int>();
      for (const auto& id : j.at("model_ids"))
        run.roster.push_back(id.get<std::string>());
      have_header = true;
      continue;
    }
    int round_index = j.at("round_index").get<int>();
    if (round_index < 0) continue;
    Round& round = rounds[round_index];
    round.index = round_index;
    int phase = j.at("phase").get<int>();
    std::string kind = j.at("kind").get<std::string>();
    std::string actor = j.at("actor").get<std::string>();
    const json& payload = j.at("payload");

    if (phase == 1 && kind == "prompt_sent" && round.questioner.empty())
      round.questioner = actor;
    if (kind == "round_skipped") round.skipped = true;
    if (phase == 2 && kind == "artifact_validated")
      round.answers[actor] = payload.at("text").get<std::string>();
    if (phase == 3 && kind == "response_received") {
      std::string key = std::to_string(round_index) + "/" + actor + "/" +
                        std::to_string(payload.at("prompt_attempt").get<int>());
      phase3_responses[key] = payload.at("text").get<std::string>();
    }
    if (phase == 3 && kind == "artifact_validated") {
      Evaluation ev;
      ev.evaluator = actor;
      for (auto& [label, answerer] : payload.at("labels").items())
        ev.label_to_answerer[label] = answerer.get<std::string>();
      std::string key = std::to_string(round_index) + "/" + actor + "/" +
                        std::to_string(payload.at("prompt_attempt").get<int>());
      json doc = json::parse(last_fenced_block(phase3_responses.at(key)));
      if (doc.contains("ordering")) {
        for (const auto& label : doc["ordering"])
          ev.ordering.push_back(label.get<std::string>());
      } else {
        ev.rubric = true;
        for (auto& [label, dims] : doc.at("scores").items()) {
          static const char* names[] = {"correctness", "efficiency",
                                        "readability", "structure", "memory"};
          double sum = 0.0;
          for (const char* dim : names) sum += dims.at(dim).get<double>();
          ev.rubric_totals[label] = std::round(sum / 5.0);
        }
      }
      round.evaluations.push_back(std::move(ev));
    }
    if (kind == "round_scored")
      for (auto& [model, score] : payload.at("scores").items())
        round.logged_scores[model] = score.get<double>();
  }
  for (auto& [index, round] : rounds) run.rounds.push_back(std::move(round));
  return run;
}

/// answerer -> score for one evaluation, by counting (not the closed form).
inline std::map<std::string, double> cells(const Evaluation& ev) {
  std::map<std::string, double> out;
  if (!ev.rubric) {
    std::size_t m = ev.ordering.size();
    for (std::size_t i = 0; i < m; ++i) {
      int below = 0;
      for (std::size_t j = 0; j < m; ++j)
        if (j > i) ++below;
      double score = m == 1 ? 100.0 : 100.0 * below / (double)(m - 1);
      out[ev.label_to_answerer.at(ev.ordering[i])] = score;
    }
  } else {
    for (auto& [label, total] : ev.rubric_totals)
      out[ev.label_to_answerer.at(label)] = total;
  }
  return out;
}

inline std::map<std::string, double> round_scores(const Round& round) {
  std::map<std::string, double> sum;
  std::map<std::string, int> count;
  for (const auto& ev : round.evaluations)
    for (auto& [answerer, score] : cells(ev)) {
      sum[answerer] += score;
      count[answerer] += 1;
    }
  std::map<std::string, double> out;
  for (auto& [answerer, s] : sum) out[answerer] = s / count[answerer];
  return out;
}

struct BoardEntry {
  std::string model_id;
  bool scored = false;
  double aggregate = 0.0;
};

inline std::vector<BoardEntry> leaderboard(const Run& run) {
  std::map<std::string, double> sum;
  std::map<std::string, int> count;
  for (const auto& round : run.rounds)
    for (auto& [model, score] : round_scores(round)) {
      sum[model] += score;
      count[model] += 1;
    }
  std::vector<BoardEntry> out;
  for (const auto& id : run.roster) {
    BoardEntry e;
    e.model_id = id;
    if (count.count(id)) {
      e.scored = true;
      e.aggregate = sum[id] / count[id];
    }
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const BoardEntry& a, const BoardEntry& b) {
    if (a.scored != b.scored) return a.scored;
    if (a.scored && a.aggregate != b.aggregate) return a.aggregate > b.aggregate;
    return a.model_id < b.model_id;
  });
  return out;
}

inline std::vector<BoardEntry> merged_leaderboard(const std::vector<Run>& runs) {
  std::map<std::string, double> sum;
  std::map<std::string, int> count;
  std::vector<std::string> roster = runs.front().roster;
  for (const auto& run : runs)
    for (const auto& entry : leaderboard(run))
      if (entry.scored) {
        sum[entry.model_id] += entry.aggregate;
        count[entry.model_id] += 1;
      }
  std::vector<BoardEntry> out;
  for (const auto& id : roster) {
    BoardEntry e;
    e.model_id = id;
    if (count.count(id)) {
      e.scored = true;
      e.aggregate = sum[id] / count[id];
    }
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const BoardEntry& a, const BoardEntry& b) {
    if (a.scored != b.scored) return a.scored;
    if (a.scored && a.aggregate != b.aggregate) return a.aggregate > b.aggregate;
    return a.model_id < b.model_id;
  });
  return out;
}

inline std::optional<double> top_k(const Round& round, int k) {
  struct Scored {
    std::string answerer;
    double score;
    std::string label;
  };
  std::vector<std::set<std::string>> tops;
  for (const auto& ev : round.evaluations) {
    std::map<std::string, std::string> answerer_to_label;
    for (auto& [label, answerer] : ev.label_to_answerer)
      answerer_to_label[answerer] = label;
    std::vector<Scored> scored;
    for (auto& [answerer, score] : cells(ev))
      scored.push_back({answerer, score, answerer_to_label[answerer]});
    if ((int)scored.size() < k) return std::nullopt;
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.label < b.label;
    });
    std::set<std::string> top;
    for (int i = 0; i < k; ++i) top.insert(scored[i].answerer);
    tops.push_back(top);
  }
  if (tops.size() < 2) return std::nullopt;
  double total = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < tops.size(); ++i)
    for (std::size_t j = i + 1; j < tops.size(); ++j) {
      int overlap = 0;
      for (const auto& id : tops[i])
        if (tops[j].count(id)) ++overlap;
      total += (double)overlap / k;
      ++pairs;
    }
  return total / pairs;
}

inline std::map<std::string, double> per_answer_stddev(const Round& round) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& ev : round.evaluations)
    for (auto& [answerer, score] : cells(ev)) values[answerer].push_back(score);
  std::map<std::string, double> out;
  for (auto& [answerer, v] : values) {
    if (v.size() < 2) continue;
    double mean = 0;
    for (double x : v) mean += x;
    mean /= v.size();
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    out[answerer] = std::sqrt(var / v.size());
  }
  return out;
}

struct DualAxis {
  std::optional<double> solving;
  std::optional<double> difficulty;
};

inline std::map<std::string, DualAxis> dual_axis(const std::vector<Run>& runs) {
  std::map<std::string, DualAxis> out;
  auto merged = merged_leaderboard(runs);
  for (const auto& entry : merged)
    if (entry.scored) out[entry.model_id].solving = entry.aggregate;
  std::map<std::string, double> sum;
  std::map<std::string, int> count;
  for (const auto& run : runs)
    for (const auto& round : run.rounds) {
      if (round.skipped) continue;
      auto scores = round_scores(round);
      if (scores.empty()) continue;
      double mean = 0;
      for (auto& [model, score] : scores) mean += score;
      mean /= scores.size();
      sum[round.questioner] += mean;
      count[round.questioner] += 1;
    }
  for (auto& [model, c] : count) out[model].difficulty = sum[model] / c;
  return out;
}

}  // namespace oracle
