#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crowdeval/backends.hpp"
#include "crowdeval/builtin_domains.hpp"
#include "crowdeval/config.hpp"
#include "crowdeval/domain.hpp"
#include "crowdeval/event_log.hpp"
#include "crowdeval/http_backend.hpp"
#include "crowdeval/mock_backend.hpp"
#include "crowdeval/retry.hpp"
#include "crowdeval/scoring.hpp"

namespace crowdeval {

struct Hooks {
  std::function<void(int run, int round, const Leaderboard&)> on_leaderboard;
  std::function<void(const std::string&)> info;
  Sleeper sleeper = default_sleeper;
  /// Throw HaltRequested once the given {run, round, phase} boundary has
  /// been persisted. Test instrumentation for crash/resume coverage.
  std::optional<std::array<int, 3>> halt_after;
};

struct RunSummary {
  int run_index = 0;
  std::filesystem::path log_path;
  Leaderboard final_leaderboard;
  int rounds_completed = 0;
  int rounds_skipped = 0;
  bool was_already_complete = false;
};

struct RunResult {
  std::vector<RunSummary> runs;
  Leaderboard merged;
};

namespace detail {

template <typename Artifact>
struct ChainOutcome {
  bool ok = false;
  Artifact artifact{};
  std::vector<EventLogWriter::Draft> drafts;
};

/// One logical model call: up to R validation-driven prompt attempts, each
/// backed by transport-level retries. Produces the full event trail but
/// does not touch the log; the orchestrator commits drafts in roster order
/// so logs are deterministic under concurrency.
template <typename Artifact>
ChainOutcome<Artifact> run_call_chain(
    Backend& backend, const SamplingParams& params, CallContext ctx,
    const RetryPolicy& policy, std::uint64_t jitter_seed_base,
    const Sleeper& sleeper,
    const std::function<std::string(const ValidationErrors&)>& build_prompt,
    const std::function<Parsed<Artifact>(const std::string&)>& validate,
    const std::function<json(const Artifact&, const CompletionResult&)>&
        artifact_payload) {
  ChainOutcome<Artifact> out;
  ValidationErrors feedback;
  for (int prompt_attempt = 1; prompt_attempt <= policy.max_prompt_attempts;
       ++prompt_attempt) {
    ctx.prompt_attempt = prompt_attempt;
    std::string prompt = build_prompt(feedback);

    EventLogWriter::Draft sent;
    sent.round_index = ctx.round_index;
    sent.phase = ctx.phase;
    sent.kind = event_kind::prompt_sent;
    sent.actor = ctx.actor;
    sent.payload = json{{"role", ctx.role},
                        {"prompt_attempt", prompt_attempt},
                        {"backend_id", backend.config().backend_id},
                        {"model_name", backend.config().model_name},
                        {"temperature", params.temperature},
                        {"max_tokens", params.max_tokens},
                        {"prompt", prompt}};
    out.drafts.push_back(std::move(sent));

    std::mt19937_64 jitter_rng(fnv1a64_mix(
        jitter_seed_base, static_cast<std::uint64_t>(prompt_attempt)));
    RetryOutcome attempt_result = complete_with_retries(
        backend, prompt, params, ctx, policy, jitter_rng, sleeper);

    for (std::size_t i = 0; i < attempt_result.attempts.size(); ++i) {
      const AttemptRecord& rec = attempt_result.attempts[i];
      EventLogWriter::Draft d;
      d.round_index = ctx.round_index;
      d.phase = ctx.phase;
      d.actor = ctx.actor;
      if (rec.result.ok) {
        d.kind = event_kind::response_received;
        d.payload = json{{"prompt_attempt", prompt_attempt},
                         {"transport_attempt", rec.transport_attempt},
                         {"latency_ms", rec.result.latency_ms},
                         {"http_status", rec.result.http_status},
                         {"text", rec.result.text}};
        if (rec.result.token_usage)
          d.payload["token_usage"] = *rec.result.token_usage;
      } else {
        const bool last_of_chain =
            i + 1 == attempt_result.attempts.size() && !attempt_result.ok;
        d.kind = event_kind::attempt_failed;
        d.payload = json{{"prompt_attempt", prompt_attempt},
                         {"transport_attempt", rec.transport_attempt},
                         {"error", call_error_kind_name(rec.result.error)},
                         {"http_status", rec.result.http_status},
                         {"retryable", rec.result.retryable()},
                         {"backoff_ms", rec.backoff_ms},
                         {"terminal", last_of_chain},
                         {"detail", rec.result.error_detail}};
      }
      out.drafts.push_back(std::move(d));
    }

    if (!attempt_result.ok) return out;  // transport failure ends the chain

    Parsed<Artifact> parsed = validate(attempt_result.final.text);
    if (parsed.ok()) {
      EventLogWriter::Draft d;
      d.round_index = ctx.round_index;
      d.phase = ctx.phase;
      d.kind = event_kind::artifact_validated;
      d.actor = ctx.actor;
      d.payload = artifact_payload(*parsed.value, attempt_result.final);
      d.payload["prompt_attempt"] = prompt_attempt;
      out.drafts.push_back(std::move(d));
      out.ok = true;
      out.artifact = std::move(*parsed.value);
      return out;
    }

    EventLogWriter::Draft d;
    d.round_index = ctx.round_index;
    d.phase = ctx.phase;
    d.kind = event_kind::validation_failed;
    d.actor = ctx.actor;
    d.payload = json{{"prompt_attempt", prompt_attempt},
                     {"errors", parsed.errors.errors},
                     {"terminal", prompt_attempt == policy.max_prompt_attempts}};
    out.drafts.push_back(std::move(d));
    feedback = parsed.errors;
  }
  return out;
}

}  // namespace detail

/// Drives the four-phase round state machine across the configured number
/// of independent runs, persisting every step before moving on.
class Orchestrator {
 public:
  explicit Orchestrator(RunConfig config, Hooks hooks = {})
      : config_(std::move(config)),
        hooks_(std::move(hooks)),
        domain_(resolve_domain(config_.domain_id, config_.domain_file)),
        digest_(config_digest(config_)) {
    ConfigReport report = validate_config(config_);
    if (!report.ok()) {
      std::string msg = "invalid configuration:";
      for (const auto& e : report.errors) msg += "\n  - " + e;
      throw ConfigError(msg);
    }
    for (const auto& model : config_.models) {
      const BackendConfig& bc = config_.backends.at(model.backend_ref);
      if (!backends_.count(model.backend_ref)) {
        backends_[model.backend_ref] =
            bc.kind == "mock"
                ? std::static_pointer_cast<Backend>(
                      MockBackend::from_config(bc, config_.seed))
                : std::static_pointer_cast<Backend>(
                      std::make_shared<HttpBackend>(bc));
      }
    }
  }

  static std::filesystem::path run_log_path(const RunConfig& config,
                                            int run_index) {
    return std::filesystem::path(config.output_dir) /
           ("events_run_" + std::to_string(run_index) + ".jsonl");
  }

  bool all_mock() const {
    for (auto& [id, b] : backends_)
      if (!b->is_mock()) return false;
    return true;
  }

  /// Fail fast when a live backend cannot be reached.
  void probe_backends() {
    for (auto& [id, backend] : backends_)
      if (!backend->is_mock()) backend->probe();
  }

  RunResult run(bool allow_resume = false) {
    std::filesystem::create_directories(config_.output_dir);
    probe_backends();
    RunResult result;
    for (int run_index = 0; run_index < config_.num_runs; ++run_index)
      result.runs.push_back(execute_run(run_index, allow_resume));
    std::vector<Leaderboard> boards;
    for (const auto& r : result.runs) boards.push_back(r.final_leaderboard);
    result.merged = merge_leaderboards(boards, config_.roster());
    return result;
  }

  const RunConfig& config() const { return config_; }
  const DomainSpec& domain() const { return domain_; }

 private:
  struct RunContext {
    int run_index = 0;
    std::unique_ptr<EventLogWriter> writer;
    std::vector<Round> completed;
    std::optional<Round> partial;
  };

  RunSummary execute_run(int run_index, bool allow_resume) {
    RunContext ctx;
    ctx.run_index = run_index;
    std::filesystem::path path = run_log_path(config_, run_index);

    LogHeader header;
    header.experiment = config_.experiment;
    header.run_index = run_index;
    header.config_digest = digest_;
    header.seed = config_.seed;
    header.domain_id = config_.domain_id;
    header.model_ids = config_.roster();
    header.clock = all_mock() ? "logical" : "wall";
    header.engine_version = kEngineVersion;
    header.config = config_to_json(config_, /*include_output_dir=*/false);

    if (std::filesystem::exists(path)) {
      if (!allow_resume)
        throw IoError("event log already exists (pass resume to continue): " +
                      path.string());
      ReplayResult rep = replay(path);
      if (rep.header.config_digest != digest_)
        throw ConfigMismatchError(
            "config digest mismatch for " + path.string() + ": log has " +
            rep.header.config_digest + ", current config is " + digest_);
      if (rep.header.run_index != run_index)
        throw ConfigMismatchError("log " + path.string() +
                                  " belongs to run " +
                                  std::to_string(rep.header.run_index));
      if (rep.state.run_completed) {
        RunSummary summary;
        summary.run_index = run_index;
        summary.log_path = path;
        summary.final_leaderboard = rep.state.interim_leaderboard;
        summary.was_already_complete = true;
        for (const auto& r : rep.state.completed_rounds)
          (r.skipped ? summary.rounds_skipped : summary.rounds_completed)++;
        info("run " + std::to_string(run_index) + ": already complete, skipping");
        return summary;
      }
      ClockFn clock = header.clock == "logical" ? logical_clock(rep.last_ts_ms)
                                                : wall_clock();
      ctx.writer = EventLogWriter::append_to(path, rep.header, std::move(clock),
                                             rep.last_seq);
      ctx.completed = std::move(rep.state.completed_rounds);
      ctx.partial = std::move(rep.state.partial_round);
      info("run " + std::to_string(run_index) + ": resuming after " +
           std::to_string(ctx.completed.size()) + " completed round(s)");
    } else {
      ClockFn clock =
          header.clock == "logical" ? logical_clock(0) : wall_clock();
      ctx.writer = EventLogWriter::create(path, header, std::move(clock));
    }

    std::vector<std::string> rotation = config_.roster();
    if (config_.shuffle_questioners) {
      std::mt19937_64 rng(derive_seed(config_.seed, {"rotation"},
                                      {static_cast<std::uint64_t>(run_index)}));
      deterministic_shuffle(rotation, rng);
    }

    try {
      for (int round_index = 0; round_index < static_cast<int>(rotation.size());
           ++round_index) {
        if (round_index < static_cast<int>(ctx.completed.size())) continue;
        Round* partial = nullptr;
        if (ctx.partial && ctx.partial->round_index == round_index)
          partial = &*ctx.partial;
        else if (ctx.partial)
          throw CorruptLogError("resume: unfinished round " +
                                std::to_string(ctx.partial->round_index) +
                                " is not the next round to execute");
        if (partial && !partial->questioner.empty() &&
            partial->questioner != rotation[round_index])
          throw ConfigMismatchError(
              "resume: logged questioner for round " +
              std::to_string(round_index) + " is " + partial->questioner +
              " but the configured rotation expects " + rotation[round_index]);
        execute_round(ctx, round_index, rotation[round_index], partial);
        ctx.partial.reset();
      }
    } catch (const HaltRequested&) {
      throw;
    } catch (const IoError& e) {
      throw RunAbortedError(std::string("run aborted (persist failure): ") +
                            e.what());
    }

    RunSummary summary;
    summary.run_index = run_index;
    summary.log_path = path;
    summary.final_leaderboard = final_leaderboard(ctx.completed, config_.roster());
    int answer_records = 0, evaluation_records = 0;
    for (const auto& r : ctx.completed) {
      (r.skipped ? summary.rounds_skipped : summary.rounds_completed)++;
      answer_records += static_cast<int>(r.answers.size());
      for (const auto& [e, record] : r.evaluations)
        evaluation_records += static_cast<int>(record.label_to_answerer.size());
    }
    EventLogWriter::Draft done;
    done.round_index = -1;
    done.phase = 4;
    done.kind = event_kind::run_completed;
    done.actor = "orchestrator";
    done.payload = json{{"rounds_completed", summary.rounds_completed},
                        {"rounds_skipped", summary.rounds_skipped},
                        {"answer_records", answer_records},
                        {"evaluation_records", evaluation_records},
                        {"final_leaderboard",
                         leaderboard_to_json(summary.final_leaderboard)}};
    ctx.writer->append(done);
    return summary;
  }

  void execute_round(RunContext& ctx, int round_index,
                     const std::string& questioner, Round* resumed) {
    Round round;
    if (resumed) round = *resumed;
    round.round_index = round_index;
    round.questioner = questioner;

    info("run " + std::to_string(ctx.run_index) + " round " +
         std::to_string(round_index) + ": questioner " + questioner);

    // Phase 1: generate question
    if (round.question.statement.empty()) {
      if (!phase_generate_question(ctx, round)) {
        EventLogWriter::Draft skip;
        skip.round_index = round_index;
        skip.phase = 1;
        skip.kind = event_kind::round_skipped;
        skip.actor = "orchestrator";
        skip.payload = json{
            {"questioner", questioner},
            {"reason", "question generation failed after retries; round skipped "
                       "and excluded from averaging"}};
        ctx.writer->append(skip);
        round.skipped = true;
        ctx.completed.push_back(round);
        maybe_halt(ctx.run_index, round_index, 1);
        return;
      }
    }
    maybe_halt(ctx.run_index, round_index, 1);

    // Phase 2: independent answers
    phase_collect_answers(ctx, round);
    maybe_halt(ctx.run_index, round_index, 2);

    // Phase 3: mutual evaluation
    phase_collect_evaluations(ctx, round);
    maybe_halt(ctx.run_index, round_index, 3);

    // Phase 4: score and re-rank
    phase_update_ranking(ctx, round);
    maybe_halt(ctx.run_index, round_index, 4);
  }

  bool phase_generate_question(RunContext& ctx, Round& round) {
    const ModelSpec& model = model_spec(round.questioner);
    Backend& backend = *backends_.at(model.backend_ref);
    CallContext call;
    call.run_index = ctx.run_index;
    call.round_index = round.round_index;
    call.phase = 1;
    call.actor = model.model_id;
    call.role = "questioner";

    auto outcome = detail::run_call_chain<QuestionArtifact>(
        backend, config_.sampling.question, call, config_.retry,
        jitter_seed(call), hooks_.sleeper,
        [&](const ValidationErrors& feedback) {
          QuestionPromptContext qctx;
          qctx.round_index = round.round_index;
          qctx.retry_feedback = feedback;
          return render_question_prompt(domain_, qctx);
        },
        [&](const std::string& raw) { return validate_question(domain_, raw); },
        [&](const QuestionArtifact& artifact, const CompletionResult& final) {
          json sections = json::object();
          for (auto& [name, body] : artifact.sections) sections[name] = body;
          return json{{"domain_id", artifact.domain_id},
                      {"statement", artifact.statement},
                      {"reference_answer", artifact.reference_answer},
                      {"sections", std::move(sections)},
                      {"latency_ms", final.latency_ms}};
        });
    commit(ctx, outcome.drafts);
    if (outcome.ok) round.question = std::move(outcome.artifact);
    return outcome.ok;
  }

  void phase_collect_answers(RunContext& ctx, Round& round) {
    std::vector<std::string> pending;
    for (const auto& model : config_.models) {
      if (model.model_id == round.questioner) continue;
      if (round.answers.count(model.model_id)) continue;
      if (round.answer_failures.count(model.model_id)) continue;
      pending.push_back(model.model_id);
    }

    // Answerers see the statement only; the reference answer never leaves
    // the orchestrator in this phase.
    std::string prompt = render_answer_prompt(domain_, round.question);

    std::vector<std::future<detail::ChainOutcome<AnswerArtifact>>> futures;
    for (const auto& answerer : pending) {
      futures.push_back(std::async(std::launch::async, [&, answerer] {
        const ModelSpec& model = model_spec(answerer);
        Backend& backend = *backends_.at(model.backend_ref);
        CallContext call;
        call.run_index = ctx.run_index;
        call.round_index = round.round_index;
        call.phase = 2;
        call.actor = answerer;
        call.role = "answerer";
        return detail::run_call_chain<AnswerArtifact>(
            backend, config_.sampling.answer, call, config_.retry,
            jitter_seed(call), hooks_.sleeper,
            [&](const ValidationErrors&) { return prompt; },
            [&](const std::string& raw) {
              Parsed<AnswerArtifact> parsed;
              if (trim_view(raw).empty()) {
                parsed.errors.errors.push_back("empty answer");
                return parsed;
              }
              AnswerArtifact a;
              a.answerer_id = answerer;
              a.text = raw;
              parsed.value = std::move(a);
              return parsed;
            },
            [&](const AnswerArtifact& artifact, const CompletionResult& final) {
              return json{{"text", artifact.text},
                          {"latency_ms", final.latency_ms}};
            });
      }));
    }

    for (std::size_t i = 0; i < futures.size(); ++i) {
      auto outcome = futures[i].get();
      commit(ctx, outcome.drafts);
      if (outcome.ok) {
        outcome.artifact.latency_ms = final_latency(outcome.drafts);
        round.answers[pending[i]] = std::move(outcome.artifact);
      } else {
        round.answer_failures.insert(pending[i]);
      }
    }
  }

  void phase_collect_evaluations(RunContext& ctx, Round& round) {
    struct EvalTask {
      std::string evaluator;
      std::vector<LabeledAnswer> labeled;
      std::map<std::string, std::string> label_to_answerer;
      std::vector<std::string> labels;
    };
    std::vector<EvalTask> tasks;
    for (const auto& model : config_.models) {
      const std::string& evaluator = model.model_id;
      if (round.evaluations.count(evaluator)) continue;
      if (round.evaluation_failures.count(evaluator)) continue;

      // every model evaluates, excluding its own answer
      std::vector<std::string> targets;
      for (const auto& m : config_.models)
        if (m.model_id != evaluator && round.answers.count(m.model_id))
          targets.push_back(m.model_id);
      if (targets.empty()) continue;  // nothing this evaluator may judge

      std::mt19937_64 rng(derive_seed(
          config_.seed, {"labels", evaluator},
          {static_cast<std::uint64_t>(ctx.run_index),
           static_cast<std::uint64_t>(round.round_index)}));
      deterministic_shuffle(targets, rng);

      EvalTask task;
      task.evaluator = evaluator;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        std::string label = answer_label(i);
        task.labeled.push_back({label, round.answers.at(targets[i]).text});
        task.label_to_answerer[label] = targets[i];
        task.labels.push_back(label);
      }
      tasks.push_back(std::move(task));
    }

    std::string interim_block;
    if (config_.inject_interim_leaderboard) {
      interim_block =
          "Interim standings after " + std::to_string(ctx.completed.size()) +
          " round(s) (context only; judge the answers on their merits):\n" +
          leaderboard_text(final_leaderboard(ctx.completed, config_.roster())) +
          "\n";
    }

    std::vector<std::future<detail::ChainOutcome<EvaluationRecord>>> futures;
    for (const auto& task : tasks) {
      futures.push_back(std::async(std::launch::async, [&, task] {
        const ModelSpec& model = model_spec(task.evaluator);
        Backend& backend = *backends_.at(model.backend_ref);
        CallContext call;
        call.run_index = ctx.run_index;
        call.round_index = round.round_index;
        call.phase = 3;
        call.actor = task.evaluator;
        call.role = "evaluator";
        return detail::run_call_chain<EvaluationRecord>(
            backend, config_.sampling.evaluation, call, config_.retry,
            jitter_seed(call), hooks_.sleeper,
            [&](const ValidationErrors& feedback) {
              EvaluationPromptContext ectx;
              ectx.interim_leaderboard_block = interim_block;
              ectx.retry_feedback = feedback;
              return render_evaluation_prompt(domain_, round.question,
                                              task.labeled, ectx);
            },
            [&](const std::string& raw) {
              Parsed<EvaluationRecord> parsed;
              Parsed<EvaluationPayload> payload =
                  parse_evaluation(domain_, raw, task.labels);
              parsed.errors = payload.errors;
              if (payload.ok()) {
                EvaluationRecord record;
                record.evaluator_id = task.evaluator;
                record.label_to_answerer = task.label_to_answerer;
                record.payload = std::move(*payload.value);
                parsed.value = std::move(record);
              }
              return parsed;
            },
            [&](const EvaluationRecord& record, const CompletionResult& final) {
              json labels = json::object();
              for (auto& [label, answerer] : record.label_to_answerer)
                labels[label] = answerer;
              json decoded = json::object();
              for (auto& [answerer, score] : decode_evaluation(record))
                decoded[answerer] = score;
              return json{{"labels", std::move(labels)},
                          {"payload", payload_to_json(record.payload)},
                          {"decoded_scores", std::move(decoded)},
                          {"latency_ms", final.latency_ms}};
            });
      }));
    }

    for (std::size_t i = 0; i < futures.size(); ++i) {
      auto outcome = futures[i].get();
      commit(ctx, outcome.drafts);
      if (outcome.ok)
        round.evaluations[tasks[i].evaluator] = std::move(outcome.artifact);
      else
        round.evaluation_failures.insert(tasks[i].evaluator);
    }
  }

  void phase_update_ranking(RunContext& ctx, Round& round) {
    round.round_scores = compute_round_scores(round);

    EventLogWriter::Draft scored;
    scored.round_index = round.round_index;
    scored.phase = 4;
    scored.kind = event_kind::round_scored;
    scored.actor = "orchestrator";
    json scores = json::object();
    for (auto& [model, score] : round.round_scores) scores[model] = score;
    scored.payload = json{{"scores", std::move(scores)}};
    ctx.writer->append(scored);

    ctx.completed.push_back(round);
    Leaderboard interim = final_leaderboard(ctx.completed, config_.roster());

    EventLogWriter::Draft updated;
    updated.round_index = round.round_index;
    updated.phase = 4;
    updated.kind = event_kind::leaderboard_updated;
    updated.actor = "orchestrator";
    updated.payload = leaderboard_to_json(interim);
    ctx.writer->append(updated);

    if (hooks_.on_leaderboard)
      hooks_.on_leaderboard(ctx.run_index, round.round_index, interim);
  }

  // -- helpers --------------------------------------------------------------

  const ModelSpec& model_spec(const std::string& model_id) const {
    for (const auto& m : config_.models)
      if (m.model_id == model_id) return m;
    throw ConfigError("unknown model_id: " + model_id);
  }

  std::uint64_t jitter_seed(const CallContext& call) const {
    return derive_seed(config_.seed, {"jitter", call.actor},
                       {static_cast<std::uint64_t>(call.run_index),
                        static_cast<std::uint64_t>(call.round_index),
                        static_cast<std::uint64_t>(call.phase)});
  }

  static double final_latency(const std::vector<EventLogWriter::Draft>& drafts) {
    for (auto it = drafts.rbegin(); it != drafts.rend(); ++it)
      if (it->kind == event_kind::response_received)
        return it->payload.value("latency_ms", 0.0);
    return 0.0;
  }

  void commit(RunContext& ctx, const std::vector<EventLogWriter::Draft>& drafts) {
    for (const auto& d : drafts) ctx.writer->append(d);
  }

  void maybe_halt(int run_index, int round_index, int phase) {
    if (hooks_.halt_after &&
        (*hooks_.halt_after)[0] == run_index &&
        (*hooks_.halt_after)[1] == round_index &&
        (*hooks_.halt_after)[2] == phase)
      throw HaltRequested("halt point reached: run " + std::to_string(run_index) +
                          " round " + std::to_string(round_index) + " phase " +
                          std::to_string(phase));
  }

  void info(const std::string& line) {
    if (hooks_.info) hooks_.info(line);
  }

  static std::string leaderboard_text(const Leaderboard& board) {
    std::string out;
    for (const auto& e : board.entries) {
      out += "  " + std::to_string(e.rank) + ". " + e.model_id + "  " +
             (e.scored ? format_double(e.aggregate) : std::string("unscored")) +
             (e.tied ? " (tied)" : "") + "\n";
    }
    return out;
  }

  RunConfig config_;
  Hooks hooks_;
  DomainSpec domain_;
  std::string digest_;
  std::map<std::string, std::shared_ptr<Backend>> backends_;
};

}  // namespace crowdeval
