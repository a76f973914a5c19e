#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "crowdeval/scoring.hpp"
#include "crowdeval/types.hpp"
#include "crowdeval/util.hpp"

namespace crowdeval {

constexpr int kLogSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Wire forms of domain values. The log is the transparency surface, so
// these are stable, documented shapes.
// ---------------------------------------------------------------------------

inline json payload_to_json(const EvaluationPayload& p) {
  json j;
  j["scheme"] = scoring_scheme_name(p.scheme);
  if (p.scheme == ScoringScheme::RelativeRank) {
    j["ordering"] = p.ordering;
  } else {
    json per_answer = json::object();
    for (auto& [label, rubric] : p.per_answer) {
      json entry = json::object();
      for (const auto& dim : rubric_dimensions())
        entry[dim] = rubric.dimensions.count(dim) ? rubric.dimensions.at(dim) : 0.0;
      entry["total"] = rubric.total;
      per_answer[label] = std::move(entry);
    }
    j["per_answer"] = std::move(per_answer);
  }
  j["rationale"] = p.rationale;
  if (!p.discrepancies.empty()) j["discrepancies"] = p.discrepancies;
  return j;
}

inline EvaluationPayload payload_from_json(const json& j) {
  EvaluationPayload p;
  p.scheme = j.value("scheme", "relative_rank") == std::string("rubric100")
                 ? ScoringScheme::Rubric100
                 : ScoringScheme::RelativeRank;
  if (p.scheme == ScoringScheme::RelativeRank) {
    for (const auto& label : j.at("ordering")) p.ordering.push_back(label);
  } else {
    for (auto& [label, entry] : j.at("per_answer").items()) {
      RubricScores rubric;
      for (const auto& dim : rubric_dimensions())
        rubric.dimensions[dim] = entry.value(dim, 0.0);
      rubric.total = entry.value("total", 0.0);
      p.per_answer[label] = std::move(rubric);
    }
  }
  p.rationale = j.value("rationale", "");
  if (j.contains("discrepancies"))
    for (const auto& d : j["discrepancies"]) p.discrepancies.push_back(d);
  return p;
}

inline json leaderboard_to_json(const Leaderboard& board) {
  json entries = json::array();
  for (const auto& e : board.entries) {
    json entry;
    entry["rank"] = e.rank;
    entry["model_id"] = e.model_id;
    entry["scored"] = e.scored;
    if (e.scored) entry["aggregate"] = e.aggregate;
    entry["rounds_counted"] = e.rounds_counted;
    entry["tied"] = e.tied;
    entries.push_back(std::move(entry));
  }
  return json{{"entries", std::move(entries)}};
}

inline Leaderboard leaderboard_from_json(const json& j) {
  Leaderboard board;
  for (const auto& entry : j.at("entries")) {
    LeaderboardEntry e;
    e.rank = entry.at("rank").get<int>();
    e.model_id = entry.at("model_id").get<std::string>();
    e.scored = entry.at("scored").get<bool>();
    if (e.scored) e.aggregate = entry.at("aggregate").get<double>();
    e.rounds_counted = entry.at("rounds_counted").get<int>();
    e.tied = entry.value("tied", false);
    board.entries.push_back(std::move(e));
  }
  return board;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct RunEvent {
  std::uint64_t seq = 0;
  std::int64_t ts_ms = 0;
  int run_index = 0;
  int round_index = -1;  // -1 for run-scoped events
  int phase = 0;         // 1..4
  std::string kind;
  std::string actor;  // model_id or "orchestrator"
  json payload;

  json to_json() const {
    json j;
    j["schema_version"] = kLogSchemaVersion;
    j["seq"] = seq;
    j["ts_ms"] = ts_ms;
    j["run_index"] = run_index;
    j["round_index"] = round_index;
    j["phase"] = phase;
    j["kind"] = kind;
    j["actor"] = actor;
    j["payload"] = payload;
    return j;
  }

  static RunEvent from_json(const json& j) {
    RunEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.ts_ms = j.at("ts_ms").get<std::int64_t>();
    e.run_index = j.at("run_index").get<int>();
    e.round_index = j.at("round_index").get<int>();
    e.phase = j.at("phase").get<int>();
    e.kind = j.at("kind").get<std::string>();
    e.actor = j.at("actor").get<std::string>();
    e.payload = j.at("payload");
    return e;
  }
};

namespace event_kind {
inline constexpr const char* prompt_sent = "prompt_sent";
inline constexpr const char* response_received = "response_received";
inline constexpr const char* attempt_failed = "attempt_failed";
inline constexpr const char* artifact_validated = "artifact_validated";
inline constexpr const char* validation_failed = "validation_failed";
inline constexpr const char* round_scored = "round_scored";
inline constexpr const char* leaderboard_updated = "leaderboard_updated";
inline constexpr const char* round_skipped = "round_skipped";
inline constexpr const char* run_completed = "run_completed";
}  // namespace event_kind

/// First record (seq 0) of every log file: enough context to validate a
/// resume and to regenerate reports without the original config file.
struct LogHeader {
  int schema_version = kLogSchemaVersion;
  std::string experiment;
  int run_index = 0;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string domain_id;
  std::vector<std::string> model_ids;  // rotation-preference (config) order
  std::string clock = "wall";          // "logical" for all-mock runs
  std::string engine_version;
  json config;  // effective configuration (output_dir and secrets excluded)

  json to_json() const {
    json j;
    j["schema_version"] = schema_version;
    j["seq"] = 0;
    j["kind"] = "header";
    j["experiment"] = experiment;
    j["run_index"] = run_index;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["domain_id"] = domain_id;
    j["model_ids"] = model_ids;
    j["clock"] = clock;
    j["engine_version"] = engine_version;
    j["config"] = config;
    return j;
  }

  static LogHeader from_json(const json& j) {
    LogHeader h;
    h.schema_version = j.at("schema_version").get<int>();
    h.experiment = j.at("experiment").get<std::string>();
    h.run_index = j.at("run_index").get<int>();
    h.config_digest = j.at("config_digest").get<std::string>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.domain_id = j.at("domain_id").get<std::string>();
    for (const auto& id : j.at("model_ids")) h.model_ids.push_back(id);
    h.clock = j.value("clock", "wall");
    h.engine_version = j.value("engine_version", "");
    h.config = j.value("config", json::object());
    return h;
  }
};

// ---------------------------------------------------------------------------
// Clocks
// ---------------------------------------------------------------------------

using ClockFn = std::function<std::int64_t()>;

inline ClockFn wall_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

/// Monotone counter: one tick per event. Used for all-mock runs so that
/// repeated executions produce byte-identical logs.
inline ClockFn logical_clock(std::int64_t start = 0) {
  auto state = std::make_shared<std::atomic<std::int64_t>>(start);
  return [state] { return state->fetch_add(1) + 1; };
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

/// Single logical writer per run file. Events are durably flushed before
/// append() returns; seq and timestamp are assigned under the writer lock,
/// so they are monotone regardless of which thread produced the event.
class EventLogWriter {
 public:
  struct Draft {
    int round_index = -1;
    int phase = 0;
    std::string kind;
    std::string actor;
    json payload;
  };

  /// Create a fresh log with its header record. Fails if the file exists.
  static std::unique_ptr<EventLogWriter> create(
      const std::filesystem::path& path, const LogHeader& header, ClockFn clock) {
    if (std::filesystem::exists(path))
      throw IoError("event log already exists: " + path.string());
    auto w = std::unique_ptr<EventLogWriter>(
        new EventLogWriter(path, header, std::move(clock), 0));
    json h = header.to_json();
    h["ts_ms"] = header.clock == "logical" ? 0 : w->clock_();
    w->write_line(h.dump());
    return w;
  }

  /// Continue an existing log. Caller replays first and passes the last
  /// assigned seq; clock must also be restored by the caller.
  static std::unique_ptr<EventLogWriter> append_to(
      const std::filesystem::path& path, const LogHeader& header, ClockFn clock,
      std::uint64_t last_seq) {
    if (!std::filesystem::exists(path))
      throw IoError("event log missing for resume: " + path.string());
    return std::unique_ptr<EventLogWriter>(
        new EventLogWriter(path, header, std::move(clock), last_seq));
  }

  std::uint64_t append(const Draft& draft) {
    std::lock_guard lock(mutex_);
    RunEvent e;
    e.seq = ++seq_;
    e.ts_ms = clock_();
    e.run_index = header_.run_index;
    e.round_index = draft.round_index;
    e.phase = draft.phase;
    e.kind = draft.kind;
    e.actor = draft.actor;
    e.payload = draft.payload;
    write_line(e.to_json().dump());
    return e.seq;
  }

  const LogHeader& header() const { return header_; }
  const std::filesystem::path& path() const { return path_; }
  std::uint64_t last_seq() const { return seq_; }

 private:
  EventLogWriter(std::filesystem::path path, LogHeader header, ClockFn clock,
                 std::uint64_t seq)
      : path_(std::move(path)),
        header_(std::move(header)),
        clock_(std::move(clock)),
        seq_(seq) {
    out_.open(path_, std::ios::app);
    if (!out_) throw IoError("cannot open event log for append: " + path_.string());
  }

  void write_line(const std::string& line) {
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw IoError("event log write failed: " + path_.string());
  }

  std::filesystem::path path_;
  LogHeader header_;
  ClockFn clock_;
  std::uint64_t seq_;
  std::ofstream out_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Reading and replay
// ---------------------------------------------------------------------------

struct LogFile {
  LogHeader header;
  std::vector<RunEvent> events;
};

/// Parse and structurally validate a log file: header first, then events
/// with gapless ascending seq and prompt-before-response pairing.
inline LogFile read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event log: " + path.string());
  LogFile file;
  std::string line;
  std::uint64_t line_no = 0;
  bool have_header = false;
  std::set<std::string> outstanding_prompts;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw CorruptLogError(path.string() + ":" + std::to_string(line_no) +
                            ": not valid JSON");
    if (!have_header) {
      if (j.value("kind", "") != "header" || j.value("seq", 1ULL) != 0ULL)
        throw CorruptLogError(path.string() + ": first record must be the header");
      file.header = LogHeader::from_json(j);
      have_header = true;
      continue;
    }
    RunEvent e;
    try {
      e = RunEvent::from_json(j);
    } catch (const json::exception& ex) {
      throw CorruptLogError(path.string() + ":" + std::to_string(line_no) +
                            ": bad record: " + ex.what());
    }
    if (e.seq != file.events.size() + 1)
      throw CorruptLogError(path.string() + ": seq gap at record " +
                            std::to_string(e.seq) + " (expected " +
                            std::to_string(file.events.size() + 1) + ")");
    std::string call_key = std::to_string(e.round_index) + "/" +
                           std::to_string(e.phase) + "/" + e.actor + "/" +
                           std::to_string(e.payload.value("prompt_attempt", 0));
    if (e.kind == event_kind::prompt_sent) outstanding_prompts.insert(call_key);
    if (e.kind == event_kind::response_received &&
        !outstanding_prompts.count(call_key))
      throw CorruptLogError(path.string() + ": response at seq " +
                            std::to_string(e.seq) +
                            " has no preceding prompt_sent");
    file.events.push_back(std::move(e));
  }
  if (!have_header)
    throw CorruptLogError(path.string() + ": empty log (no header record)");
  return file;
}

struct ReplayResult {
  LogHeader header;
  RunState state;
  std::uint64_t last_seq = 0;
  std::int64_t last_ts_ms = 0;
  std::size_t event_count = 0;
  // round_index -> [first seq, last seq]; -1 covers run-scoped events
  std::map<int, std::pair<std::uint64_t, std::uint64_t>> round_seq_ranges;
};

namespace detail {

inline void apply_artifact_event(Round& round, const RunEvent& e) {
  if (e.phase == 1) {
    QuestionArtifact q;
    q.domain_id = e.payload.value("domain_id", "");
    q.statement = e.payload.at("statement").get<std::string>();
    q.reference_answer = e.payload.at("reference_answer").get<std::string>();
    if (e.payload.contains("sections"))
      for (auto& [name, body] : e.payload["sections"].items())
        q.sections[name] = body.get<std::string>();
    q.raw_response = e.payload.value("raw_response", "");
    round.question = std::move(q);
  } else if (e.phase == 2) {
    AnswerArtifact a;
    a.answerer_id = e.actor;
    a.text = e.payload.at("text").get<std::string>();
    a.latency_ms = e.payload.value("latency_ms", 0.0);
    round.answers[e.actor] = std::move(a);
  } else if (e.phase == 3) {
    EvaluationRecord record;
    record.evaluator_id = e.actor;
    for (auto& [label, answerer] : e.payload.at("labels").items())
      record.label_to_answerer[label] = answerer.get<std::string>();
    record.payload = payload_from_json(e.payload.at("payload"));
    // the decoded scores were logged for transparency; recompute and compare
    std::map<std::string, double> decoded = decode_evaluation(record);
    if (e.payload.contains("decoded_scores")) {
      std::map<std::string, double> logged;
      for (auto& [answerer, score] : e.payload["decoded_scores"].items())
        logged[answerer] = score.get<double>();
      if (logged != decoded)
        throw IntegrityError("replay: decoded scores at seq " +
                             std::to_string(e.seq) +
                             " do not match the evaluation payload");
    }
    round.evaluations[e.actor] = std::move(record);
  }
}

inline bool terminal_failure(const RunEvent& e) {
  return (e.kind == event_kind::attempt_failed ||
          e.kind == event_kind::validation_failed) &&
         e.payload.value("terminal", false);
}

}  // namespace detail

/// Rebuild RunState purely from the log, re-deriving every score and
/// leaderboard from raw payloads and cross-checking them against the
/// logged round_scored / leaderboard_updated snapshots.
inline ReplayResult replay(const std::filesystem::path& path) {
  LogFile file = read_log(path);
  ReplayResult result;
  result.header = file.header;
  result.state.config_digest = file.header.config_digest;
  result.state.run_index = file.header.run_index;
  result.event_count = file.events.size();

  std::map<int, Round> open_rounds;
  auto& completed = result.state.completed_rounds;

  for (const auto& e : file.events) {
    result.last_seq = e.seq;
    result.last_ts_ms = e.ts_ms;
    auto [it, inserted] =
        result.round_seq_ranges.try_emplace(e.round_index, e.seq, e.seq);
    if (!inserted) it->second.second = e.seq;

    if (e.kind == event_kind::leaderboard_updated) {
      Leaderboard logged = leaderboard_from_json(e.payload);
      Leaderboard recomputed = final_leaderboard(completed, file.header.model_ids);
      if (leaderboard_to_json(logged) != leaderboard_to_json(recomputed))
        throw IntegrityError(
            "replay: leaderboard_updated at seq " + std::to_string(e.seq) +
            " does not match the leaderboard recomputed from rounds");
      result.state.interim_leaderboard = std::move(recomputed);
    } else if (e.round_index >= 0) {
      Round& round = open_rounds[e.round_index];
      round.round_index = e.round_index;
      if (e.phase == 1 && round.questioner.empty() && e.actor != "orchestrator")
        round.questioner = e.actor;

      if (e.kind == event_kind::artifact_validated) {
        detail::apply_artifact_event(round, e);
      } else if (detail::terminal_failure(e)) {
        if (e.phase == 2) round.answer_failures.insert(e.actor);
        if (e.phase == 3) round.evaluation_failures.insert(e.actor);
      } else if (e.kind == event_kind::round_skipped) {
        round.skipped = true;
        round.skip_reason = e.payload.value("reason", "");
        round.questioner = e.payload.value("questioner", round.questioner);
        completed.push_back(round);
        open_rounds.erase(e.round_index);
      } else if (e.kind == event_kind::round_scored) {
        std::map<std::string, double> recomputed = compute_round_scores(round);
        std::map<std::string, double> logged;
        for (auto& [model, score] : e.payload.at("scores").items())
          logged[model] = score.get<double>();
        if (logged != recomputed)
          throw IntegrityError(
              "replay: round_scored at seq " + std::to_string(e.seq) +
              " does not match scores recomputed from evaluation payloads");
        round.round_scores = std::move(logged);
        completed.push_back(round);
        open_rounds.erase(e.round_index);
      }
    } else if (e.kind == event_kind::run_completed) {
      Leaderboard logged =
          leaderboard_from_json(e.payload.at("final_leaderboard"));
      Leaderboard recomputed = final_leaderboard(completed, file.header.model_ids);
      if (leaderboard_to_json(logged) != leaderboard_to_json(recomputed))
        throw IntegrityError(
            "replay: run_completed final leaderboard does not match the "
            "leaderboard recomputed from rounds");
      result.state.run_completed = true;
    }
  }

  // at most one round can still be open: execution is sequential per run
  if (!open_rounds.empty()) {
    if (open_rounds.size() > 1)
      throw CorruptLogError(path.string() + ": multiple unfinished rounds");
    result.state.partial_round = open_rounds.begin()->second;
  }
  result.state.interim_leaderboard =
      final_leaderboard(completed, file.header.model_ids);
  return result;
}

}  // namespace crowdeval
