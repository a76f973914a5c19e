#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace crowdeval {

/// Insertion-ordered JSON everywhere: log records and reports must be
/// byte-stable, so key order is always the order we wrote.
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct BackendUnreachableError : Error { using Error::Error; };
struct RunAbortedError : Error { using Error::Error; };
struct TemplateVarError : Error { using Error::Error; };
struct DuplicateLabelError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct CorruptLogError : Error { using Error::Error; };
struct IntegrityError : Error { using Error::Error; };
struct ConfigMismatchError : Error { using Error::Error; };

/// Thrown by the orchestrator when a configured halt point is reached.
/// Exists for crash/resume testing; never thrown in normal operation.
struct HaltRequested : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Participants
// ---------------------------------------------------------------------------

struct ModelSpec {
  std::string model_id;      // unique within a run configuration
  std::string display_name;
  std::string backend_ref;   // key into the backend registry
};

// ---------------------------------------------------------------------------
// Domain artifacts
// ---------------------------------------------------------------------------

enum class ScoringScheme { RelativeRank, Rubric100 };

inline const char* scoring_scheme_name(ScoringScheme s) {
  return s == ScoringScheme::RelativeRank ? "relative_rank" : "rubric100";
}

/// The five rubric dimensions, in canonical order.
inline const std::vector<std::string>& rubric_dimensions() {
  static const std::vector<std::string> dims = {
      "correctness", "efficiency", "readability", "structure", "memory"};
  return dims;
}

struct QuestionArtifact {
  std::string domain_id;
  std::string statement;         // what answerers see
  std::string reference_answer;  // what evaluators see; never sent to answerers
  std::map<std::string, std::string> sections;  // canonical name -> body
  std::string raw_response;
};

struct AnswerArtifact {
  std::string answerer_id;
  std::string text;
  double latency_ms = 0.0;
};

struct RubricScores {
  std::map<std::string, double> dimensions;  // dim name -> 0..100
  double total = 0.0;                        // round(weighted mean of dims)
};

struct EvaluationPayload {
  ScoringScheme scheme = ScoringScheme::RelativeRank;
  std::vector<std::string> ordering;               // RelativeRank: labels, best first
  std::map<std::string, RubricScores> per_answer;  // Rubric100: label -> scores
  std::string rationale;
  std::vector<std::string> discrepancies;  // e.g. model-reported total ignored
};

/// One evaluator's full judgment for a round, with the anonymization key.
struct EvaluationRecord {
  std::string evaluator_id;
  std::map<std::string, std::string> label_to_answerer;  // "A" -> model_id
  EvaluationPayload payload;
};

// ---------------------------------------------------------------------------
// Rounds and runs
// ---------------------------------------------------------------------------

struct Round {
  int round_index = 0;
  std::string questioner;
  bool skipped = false;  // question generation exhausted retries
  std::string skip_reason;
  QuestionArtifact question;
  std::map<std::string, AnswerArtifact> answers;  // answerer -> artifact
  std::set<std::string> answer_failures;
  std::map<std::string, EvaluationRecord> evaluations;  // evaluator -> record
  std::set<std::string> evaluation_failures;
  std::map<std::string, double> round_scores;  // answerer -> [0,100]
};

struct LeaderboardEntry {
  std::string model_id;
  bool scored = false;       // false: never produced a scored answer
  double aggregate = 0.0;    // mean of round scores, [0,100]
  int rounds_counted = 0;
  int rank = 0;              // dense from 1; unscored entries ranked last
  bool tied = false;         // aggregate equal to a neighbor (order is by id)
};

struct Leaderboard {
  std::vector<LeaderboardEntry> entries;  // sorted by rank

  const LeaderboardEntry* find(const std::string& model_id) const {
    for (const auto& e : entries)
      if (e.model_id == model_id) return &e;
    return nullptr;
  }
};

/// Everything reconstructible from one run's event log.
struct RunState {
  std::string config_digest;
  int run_index = 0;
  std::vector<Round> completed_rounds;  // scored or skipped
  std::optional<Round> partial_round;   // in-progress round, if the log ends mid-round
  Leaderboard interim_leaderboard;
  bool run_completed = false;
};

}  // namespace crowdeval
