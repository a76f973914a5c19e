#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crowdeval/types.hpp"

namespace crowdeval {

// ---------------------------------------------------------------------------
// Rank normalization
// ---------------------------------------------------------------------------

/// Map a strict best-to-worst ordering of m labels onto [0,100]:
/// the label at 1-based rank r scores 100*(m-r)/(m-1). A single label
/// scores 100. Throws DuplicateLabelError if a label repeats.
inline std::map<std::string, double> normalize_ranking(
    const std::vector<std::string>& ordering) {
  std::map<std::string, double> scores;
  const std::size_t m = ordering.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::string& label = ordering[i];
    if (scores.count(label))
      throw DuplicateLabelError("duplicate label in ordering: " + label);
    scores[label] =
        m == 1 ? 100.0
               : 100.0 * static_cast<double>(m - (i + 1)) / static_cast<double>(m - 1);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Score matrix
// ---------------------------------------------------------------------------

/// Per-round evaluator x answerer scores in [0,100]. Missing cells are
/// simply absent; the diagonal (evaluator == answerer) never exists.
struct ScoreMatrix {
  std::map<std::string, std::map<std::string, double>> cells;  // evaluator -> answerer -> score

  std::optional<double> cell(const std::string& evaluator,
                             const std::string& answerer) const {
    auto e = cells.find(evaluator);
    if (e == cells.end()) return std::nullopt;
    auto a = e->second.find(answerer);
    if (a == e->second.end()) return std::nullopt;
    return a->second;
  }
};

/// Decode one evaluator's payload to answerer-keyed scores: normalized
/// rank scores for RelativeRank, rubric totals for Rubric100.
inline std::map<std::string, double> decode_evaluation(
    const EvaluationRecord& record) {
  std::map<std::string, double> decoded;
  if (record.payload.scheme == ScoringScheme::RelativeRank) {
    for (auto& [label, score] : normalize_ranking(record.payload.ordering)) {
      auto it = record.label_to_answerer.find(label);
      if (it != record.label_to_answerer.end()) decoded[it->second] = score;
    }
  } else {
    for (auto& [label, rubric] : record.payload.per_answer) {
      auto it = record.label_to_answerer.find(label);
      if (it != record.label_to_answerer.end()) decoded[it->second] = rubric.total;
    }
  }
  return decoded;
}

inline ScoreMatrix score_matrix(const Round& round) {
  ScoreMatrix m;
  for (auto& [evaluator, record] : round.evaluations)
    m.cells[evaluator] = decode_evaluation(record);
  return m;
}

// ---------------------------------------------------------------------------
// Round scores and leaderboards
// ---------------------------------------------------------------------------

/// Per answer: arithmetic mean over present evaluator cells. Answers with
/// zero present evaluations are absent from the result.
inline std::map<std::string, double> compute_round_scores(const ScoreMatrix& m) {
  std::map<std::string, double> sums;
  std::map<std::string, int> counts;
  for (auto& [evaluator, row] : m.cells) {
    for (auto& [answerer, score] : row) {
      sums[answerer] += score;
      counts[answerer] += 1;
    }
  }
  std::map<std::string, double> scores;
  for (auto& [answerer, sum] : sums)
    scores[answerer] = sum / counts[answerer];
  return scores;
}

inline std::map<std::string, double> compute_round_scores(const Round& round) {
  return compute_round_scores(score_matrix(round));
}

namespace detail {

inline void assign_ranks(Leaderboard& board) {
  std::stable_sort(board.entries.begin(), board.entries.end(),
                   [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
                     if (a.scored != b.scored) return a.scored;  // unscored last
                     if (a.scored && a.aggregate != b.aggregate)
                       return a.aggregate > b.aggregate;
                     return a.model_id < b.model_id;
                   });
  int rank = 0;
  for (auto& e : board.entries) e.rank = ++rank;
  for (std::size_t i = 0; i < board.entries.size(); ++i) {
    auto& e = board.entries[i];
    e.tied = e.scored &&
             ((i > 0 && board.entries[i - 1].scored &&
               board.entries[i - 1].aggregate == e.aggregate) ||
              (i + 1 < board.entries.size() && board.entries[i + 1].scored &&
               board.entries[i + 1].aggregate == e.aggregate));
  }
}

}  // namespace detail

/// Aggregate = mean of the model's round scores over rounds where it was
/// scored. Models that never scored are flagged and ranked after all
/// scored entries. Ties broken by model_id.
inline Leaderboard final_leaderboard(const std::vector<Round>& rounds,
                                     const std::vector<std::string>& roster) {
  std::map<std::string, double> sums;
  std::map<std::string, int> counts;
  for (const auto& round : rounds) {
    for (auto& [model, score] : round.round_scores) {
      sums[model] += score;
      counts[model] += 1;
    }
  }
  Leaderboard board;
  for (const auto& model : roster) {
    LeaderboardEntry e;
    e.model_id = model;
    auto it = counts.find(model);
    if (it != counts.end()) {
      e.scored = true;
      e.rounds_counted = it->second;
      e.aggregate = sums[model] / it->second;
    }
    board.entries.push_back(std::move(e));
  }
  detail::assign_ranks(board);
  return board;
}

/// Merged experiment leaderboard: per model, mean of its per-run final
/// aggregates (runs where it was scored).
inline Leaderboard merge_leaderboards(const std::vector<Leaderboard>& per_run,
                                      const std::vector<std::string>& roster) {
  Leaderboard board;
  for (const auto& model : roster) {
    LeaderboardEntry e;
    e.model_id = model;
    double sum = 0.0;
    int runs_scored = 0;
    for (const auto& run_board : per_run) {
      const LeaderboardEntry* entry = run_board.find(model);
      if (entry && entry->scored) {
        sum += entry->aggregate;
        runs_scored += 1;
        e.rounds_counted += entry->rounds_counted;
      }
    }
    if (runs_scored > 0) {
      e.scored = true;
      e.aggregate = sum / runs_scored;
    }
    board.entries.push_back(std::move(e));
  }
  detail::assign_ranks(board);
  return board;
}

// ---------------------------------------------------------------------------
// Top-k consistency
// ---------------------------------------------------------------------------

struct ScoredAnswer {
  std::string answerer_id;
  double score = 0.0;
  std::string tiebreak_label;  // the evaluator's own label for this answer
};

struct EvaluatorScores {
  std::string evaluator_id;
  std::vector<ScoredAnswer> scored;
};

/// Mean pairwise overlap of the evaluators' top-k answer sets:
/// mean over unordered evaluator pairs of |topk_i n topk_j| / k.
/// Per-evaluator top-k is by descending score, ties broken by the
/// evaluator's presented label. Throws InsufficientDataError unless
/// there are >= 2 evaluators and every evaluator scored >= k answers.
inline double top_k_consistency(const std::vector<EvaluatorScores>& evaluators,
                                int k) {
  if (k < 1) throw InsufficientDataError("top-k requires k >= 1");
  if (evaluators.size() < 2)
    throw InsufficientDataError("top-k consistency requires >= 2 evaluators");
  std::vector<std::set<std::string>> top_sets;
  for (const auto& ev : evaluators) {
    if (static_cast<int>(ev.scored.size()) < k)
      throw InsufficientDataError("evaluator " + ev.evaluator_id + " scored " +
                                  std::to_string(ev.scored.size()) +
                                  " answers, fewer than k=" + std::to_string(k));
    auto sorted = ev.scored;
    std::sort(sorted.begin(), sorted.end(),
              [](const ScoredAnswer& a, const ScoredAnswer& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.tiebreak_label < b.tiebreak_label;
              });
    std::set<std::string> top;
    for (int i = 0; i < k; ++i) top.insert(sorted[static_cast<std::size_t>(i)].answerer_id);
    top_sets.push_back(std::move(top));
  }
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < top_sets.size(); ++i) {
    for (std::size_t j = i + 1; j < top_sets.size(); ++j) {
      int overlap = 0;
      for (const auto& id : top_sets[i]) overlap += top_sets[j].count(id) ? 1 : 0;
      total += static_cast<double>(overlap) / k;
      pairs += 1;
    }
  }
  return total / pairs;
}

/// Build the per-evaluator scored lists for a round, carrying each
/// evaluator's own labels as tie-break keys.
inline std::vector<EvaluatorScores> evaluator_scores(const Round& round) {
  std::vector<EvaluatorScores> out;
  for (auto& [evaluator, record] : round.evaluations) {
    EvaluatorScores ev;
    ev.evaluator_id = evaluator;
    std::map<std::string, std::string> answerer_to_label;
    for (auto& [label, answerer] : record.label_to_answerer)
      answerer_to_label[answerer] = label;
    for (auto& [answerer, score] : decode_evaluation(record))
      ev.scored.push_back({answerer, score, answerer_to_label[answerer]});
    if (!ev.scored.empty()) out.push_back(std::move(ev));
  }
  return out;
}

inline double top_k_consistency(const Round& round, int k) {
  return top_k_consistency(evaluator_scores(round), k);
}

// ---------------------------------------------------------------------------
// Dispersion
// ---------------------------------------------------------------------------

/// Population standard deviation of each answer's evaluator scores.
/// Answers with fewer than two present evaluations are absent.
inline std::map<std::string, double> per_answer_stddev(const ScoreMatrix& m) {
  std::map<std::string, std::vector<double>> per_answer;
  for (auto& [evaluator, row] : m.cells)
    for (auto& [answerer, score] : row) per_answer[answerer].push_back(score);
  std::map<std::string, double> out;
  for (auto& [answerer, scores] : per_answer) {
    if (scores.size() < 2) continue;
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= scores.size();
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= scores.size();
    out[answerer] = std::sqrt(var);
  }
  return out;
}

inline std::map<std::string, double> per_answer_stddev(const Round& round) {
  return per_answer_stddev(score_matrix(round));
}

struct DispersionSummary {
  int answers = 0;  // answers with >= 2 evaluations
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

inline std::optional<DispersionSummary> dispersion_summary(
    const std::vector<const Round*>& rounds) {
  std::vector<double> values;
  for (const Round* round : rounds)
    for (auto& [answerer, sd] : per_answer_stddev(*round)) values.push_back(sd);
  if (values.empty()) return std::nullopt;
  DispersionSummary s;
  s.answers = static_cast<int>(values.size());
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  for (double v : values) s.mean += v;
  s.mean /= values.size();
  return s;
}

// ---------------------------------------------------------------------------
// Dual-axis metrics
// ---------------------------------------------------------------------------

struct DualAxis {
  std::optional<double> solving;     // mean of own round scores on others' questions
  std::optional<double> difficulty;  // mean over own questioner rounds of the
                                     // answerers' mean round score (lower = harder)
};

/// `runs` holds each run's completed rounds. Solving follows the
/// leaderboard aggregation (per-run mean, then mean across scored runs);
/// difficulty pools the model's questioner rounds across runs.
inline std::map<std::string, DualAxis> dual_axis_metrics(
    const std::vector<std::vector<Round>>& runs,
    const std::vector<std::string>& roster) {
  std::vector<Leaderboard> boards;
  for (const auto& rounds : runs) boards.push_back(final_leaderboard(rounds, roster));
  Leaderboard merged = merge_leaderboards(boards, roster);

  std::map<std::string, DualAxis> out;
  for (const auto& model : roster) {
    DualAxis axis;
    const LeaderboardEntry* entry = merged.find(model);
    if (entry && entry->scored) axis.solving = entry->aggregate;

    double sum = 0.0;
    int questioner_rounds = 0;
    for (const auto& rounds : runs) {
      for (const auto& round : rounds) {
        if (round.questioner != model || round.skipped) continue;
        if (round.round_scores.empty()) continue;
        double round_mean = 0.0;
        for (auto& [answerer, score] : round.round_scores) round_mean += score;
        round_mean /= round.round_scores.size();
        sum += round_mean;
        questioner_rounds += 1;
      }
    }
    if (questioner_rounds > 0) axis.difficulty = sum / questioner_rounds;
    out[model] = axis;
  }
  return out;
}

}  // namespace crowdeval
