#pragma once

#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "crowdeval/backends.hpp"
#include "crowdeval/util.hpp"

namespace crowdeval {

// ---------------------------------------------------------------------------
// Mock scripts. A script is an ordered rule list; the first rule whose
// matchers all hold decides the response. Responses are either literal
// text, a synthesized artifact ("generate"), or an injected failure.
// Matching is a pure function of the call context and prompt, so a mock
// backend behaves identically regardless of thread arrival order.
//
// File form (JSON):
//   { "seed": 7,
//     "rules": [
//       {"match": {"phase": 2, "round_index": 0, "actor": "m2",
//                  "transport_attempt": 1},
//        "fail": {"kind": "empty"}},
//       {"match": {"phase": 3}, "respond": {"generate": "evaluation",
//                                           "order": "by_answer_text"}} ],
//     "default": {"respond": {"generate": "auto"}} }
// ---------------------------------------------------------------------------

struct MockFailure {
  std::string kind;  // "timeout" | "transport" | "http" | "empty"
  int http_status = 500;
  std::string body;
};

struct MockResponse {
  std::optional<std::string> text;   // literal response
  std::string generate;              // "" | "auto" | "question" | "answer" | "evaluation"
  std::string order = "seeded";      // evaluation style: "seeded" | "by_answer_text" |
                                     // "reverse_text" | "presented"
  double latency_ms = 0.0;
};

struct MockRule {
  std::optional<int> phase;
  std::optional<int> round_index;
  std::optional<int> run_index;
  std::optional<std::string> actor;
  std::optional<std::string> role;
  std::optional<int> prompt_attempt;
  std::optional<int> transport_attempt;
  std::optional<std::string> prompt_contains;

  std::optional<MockResponse> respond;
  std::optional<MockFailure> fail;

  bool matches(const std::string& prompt, const CallContext& ctx) const {
    if (phase && *phase != ctx.phase) return false;
    if (round_index && *round_index != ctx.round_index) return false;
    if (run_index && *run_index != ctx.run_index) return false;
    if (actor && *actor != ctx.actor) return false;
    if (role && *role != ctx.role) return false;
    if (prompt_attempt && *prompt_attempt != ctx.prompt_attempt) return false;
    if (transport_attempt && *transport_attempt != ctx.transport_attempt)
      return false;
    if (prompt_contains && !contains(prompt, *prompt_contains)) return false;
    return true;
  }
};

struct MockScript {
  std::uint64_t seed = 0;
  std::vector<MockRule> rules;
  MockResponse default_response{std::nullopt, "auto"};

  static MockScript from_json(const json& j);
  static MockScript from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
      throw ConfigError("mock script is not valid JSON: " + path);
    return from_json(j);
  }

  /// Everything synthesized: questions, answers and seeded evaluations.
  static MockScript auto_script(std::uint64_t seed) {
    MockScript s;
    s.seed = seed;
    return s;
  }
};

namespace mockgen {

// Synthesized artifacts. Content derives only from (seed, run, round,
// actor) so repeated executions are byte-identical; each artifact embeds a
// unique token, which is what the leakage audits grep for.

inline std::string token(std::uint64_t seed, std::string_view tag,
                         const CallContext& ctx) {
  return hex64(derive_seed(seed, {tag, ctx.actor},
                           {static_cast<std::uint64_t>(ctx.run_index),
                            static_cast<std::uint64_t>(ctx.round_index)}))
      .substr(0, 12);
}

/// Scan a question prompt for its `== NAME ==` format lines and fill every
/// section with synthetic content. Works for any domain's section list.
inline std::string question(const std::string& prompt, std::uint64_t seed,
                            const CallContext& ctx) {
  static const std::regex fence(R"(^\s*==\s*(.+?)\s*==\s*$)");
  std::vector<std::string> sections;
  for (const auto& line : split_lines(prompt)) {
    std::smatch m;
    if (std::regex_match(line, m, fence)) {
      std::string name = to_upper(trim(m[1].str()));
      // the evaluation prompt also carries fences; question prompts only
      // ever list their required sections, so dedupe defensively
      if (std::find(sections.begin(), sections.end(), name) == sections.end())
        sections.push_back(name);
    }
  }
  std::string tok = token(seed, "question", ctx);
  std::string out = "Here is my question for this round.\n\n";
  for (const auto& name : sections) {
    out += "== " + name + " ==\n";
    if (contains(name, "REFERENCE") || contains(name, "SOLUTION")) {
      out += "Reference material ref-" + tok + ": the expected result is " +
             std::to_string(1 + (fnv1a64(tok) % 97)) + ".\n\n";
    } else {
      out += "Synthetic " + name + " content q-" + tok + " for round " +
             std::to_string(ctx.round_index + 1) + ".\n\n";
    }
  }
  return trim(out);
}

inline std::string answer(std::uint64_t seed, const CallContext& ctx) {
  std::string tok = token(seed, "answer", ctx);
  return "Worked response a-" + tok + " from " + ctx.actor + ": the result is " +
         std::to_string(1 + (fnv1a64(tok) % 97)) + ".";
}

struct PresentedAnswer {
  std::string label;
  std::string text;
};

/// The labeled answers as they appear in an evaluation prompt.
inline std::vector<PresentedAnswer> presented_answers(const std::string& prompt) {
  static const std::regex fence(R"(^\s*==\s*ANSWER\s+([A-Z])\s*==\s*$)");
  std::vector<PresentedAnswer> out;
  std::string* current = nullptr;
  for (const auto& line : split_lines(prompt)) {
    std::smatch m;
    if (std::regex_match(line, m, fence)) {
      out.push_back({m[1].str(), ""});
      current = &out.back().text;
      continue;
    }
    std::string_view t = trim_view(line);
    if (t.size() >= 5 && t.substr(0, 2) == "==" && t.substr(t.size() - 2) == "==") {
      current = nullptr;  // a different fence ends the answer block
      continue;
    }
    if (current) {
      current->append(line);
      current->push_back('\n');
    }
  }
  for (auto& a : out) a.text = trim(a.text);
  return out;
}

/// Rank or score the presented answers. Styles:
///   by_answer_text  order by answer text (all evaluators agree)
///   reverse_text    the opposite consensus
///   presented       keep presentation order (per-evaluator arbitrary)
///   seeded          per-evaluator deterministic shuffle / scores
inline std::string evaluation(const std::string& prompt, std::uint64_t seed,
                              const CallContext& ctx, const std::string& order) {
  auto answers = presented_answers(prompt);
  std::vector<std::size_t> idx(answers.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  if (order == "by_answer_text" || order == "reverse_text") {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return answers[a].text < answers[b].text;
    });
    if (order == "reverse_text") std::reverse(idx.begin(), idx.end());
  } else if (order == "seeded") {
    std::mt19937_64 rng(derive_seed(seed, {"eval", ctx.actor},
                                    {static_cast<std::uint64_t>(ctx.run_index),
                                     static_cast<std::uint64_t>(ctx.round_index)}));
    deterministic_shuffle(idx, rng);
  }  // "presented": leave as-is

  const bool rubric = contains(prompt, "OUTPUT SCHEMA (RUBRIC)");
  json doc;
  if (!rubric) {
    json ordering = json::array();
    for (std::size_t i : idx) ordering.push_back(answers[i].label);
    doc["ordering"] = std::move(ordering);
  } else {
    json scores = json::object();
    for (std::size_t pos = 0; pos < idx.size(); ++pos) {
      // Score by position so the rubric induces the same order as the
      // ranking styles; equal dimensions keep totals weight-independent.
      int v = idx.size() == 1
                  ? 90
                  : static_cast<int>(20 + (80 * (idx.size() - 1 - pos)) /
                                              (idx.size() - 1));
      json dims;
      for (const auto& dim : rubric_dimensions()) dims[dim] = v;
      dims["total"] = v;
      scores[answers[idx[pos]].label] = std::move(dims);
    }
    doc["scores"] = std::move(scores);
  }
  doc["rationale"] = "scripted judgment (" + order + ")";
  return "Considering the reference answer, my verdict follows.\n\n```json\n" +
         doc.dump() + "\n```";
}

}  // namespace mockgen

inline MockScript MockScript::from_json(const json& j) {
  MockScript s;
  s.seed = j.value("seed", 0ULL);
  auto read_response = [](const json& r) {
    MockResponse resp;
    if (r.contains("text")) resp.text = r["text"].get<std::string>();
    resp.generate = r.value("generate", resp.text ? "" : "auto");
    resp.order = r.value("order", "seeded");
    resp.latency_ms = r.value("latency_ms", 0.0);
    return resp;
  };
  auto read_failure = [](const json& f) {
    MockFailure fail;
    fail.kind = f.value("kind", "transport");
    fail.http_status = f.value("http_status", 500);
    fail.body = f.value("body", "");
    return fail;
  };
  if (j.contains("rules")) {
    for (const auto& rj : j["rules"]) {
      MockRule rule;
      if (rj.contains("match")) {
        const json& m = rj["match"];
        if (m.contains("phase")) rule.phase = m["phase"].get<int>();
        if (m.contains("round_index")) rule.round_index = m["round_index"].get<int>();
        if (m.contains("run_index")) rule.run_index = m["run_index"].get<int>();
        if (m.contains("actor")) rule.actor = m["actor"].get<std::string>();
        if (m.contains("role")) rule.role = m["role"].get<std::string>();
        if (m.contains("prompt_attempt"))
          rule.prompt_attempt = m["prompt_attempt"].get<int>();
        if (m.contains("transport_attempt"))
          rule.transport_attempt = m["transport_attempt"].get<int>();
        if (m.contains("prompt_contains"))
          rule.prompt_contains = m["prompt_contains"].get<std::string>();
      }
      if (rj.contains("respond")) rule.respond = read_response(rj["respond"]);
      if (rj.contains("fail")) rule.fail = read_failure(rj["fail"]);
      if (!rule.respond && !rule.fail)
        throw ConfigError("mock rule needs \"respond\" or \"fail\"");
      s.rules.push_back(std::move(rule));
    }
  }
  if (j.contains("default")) {
    const json& d = j["default"];
    if (d.contains("respond")) s.default_response = read_response(d["respond"]);
  }
  return s;
}

/// Deterministic scripted backend: identical request sequences produce
/// identical response sequences, with zero wall-clock dependence.
class MockBackend : public Backend {
 public:
  MockBackend(BackendConfig config, MockScript script)
      : Backend(std::move(config)), script_(std::move(script)) {}

  static std::shared_ptr<MockBackend> from_config(const BackendConfig& config,
                                                  std::uint64_t default_seed) {
    MockScript script;
    if (config.mock_script)
      script = MockScript::from_json(*config.mock_script);
    else if (!config.mock_script_path.empty())
      script = MockScript::from_file(config.mock_script_path);
    else
      script = MockScript::auto_script(default_seed);
    if (script.seed == 0) script.seed = default_seed;
    return std::make_shared<MockBackend>(config, std::move(script));
  }

  bool is_mock() const override { return true; }

  CompletionResult complete(const std::string& prompt, const SamplingParams&,
                            const CallContext& ctx) override {
    for (const auto& rule : script_.rules) {
      if (!rule.matches(prompt, ctx)) continue;
      if (rule.fail) return failure(*rule.fail);
      return respond(*rule.respond, prompt, ctx);
    }
    return respond(script_.default_response, prompt, ctx);
  }

  const MockScript& script() const { return script_; }

 private:
  CompletionResult respond(const MockResponse& resp, const std::string& prompt,
                           const CallContext& ctx) const {
    CompletionResult r;
    r.ok = true;
    r.latency_ms = resp.latency_ms;
    if (resp.text) {
      r.text = *resp.text;
      return r;
    }
    std::string kind = resp.generate;
    if (kind == "auto")
      kind = ctx.phase == 1 ? "question" : ctx.phase == 3 ? "evaluation" : "answer";
    if (kind == "question")
      r.text = mockgen::question(prompt, script_.seed, ctx);
    else if (kind == "evaluation")
      r.text = mockgen::evaluation(prompt, script_.seed, ctx, resp.order);
    else
      r.text = mockgen::answer(script_.seed, ctx);
    return r;
  }

  CompletionResult failure(const MockFailure& fail) const {
    CompletionResult r;
    r.ok = false;
    if (fail.kind == "timeout") {
      r.error = CallErrorKind::Timeout;
      r.error_detail = "scripted timeout";
    } else if (fail.kind == "empty") {
      r.error = CallErrorKind::Empty;
      r.http_status = 200;
      r.error_detail = "scripted empty response body";
    } else if (fail.kind == "http") {
      r.error = CallErrorKind::Provider;
      r.http_status = fail.http_status;
      r.error_detail = "scripted HTTP " + std::to_string(fail.http_status) +
                       (fail.body.empty() ? "" : ": " + fail.body);
    } else {
      r.error = CallErrorKind::Transport;
      r.error_detail = "scripted transport error";
    }
    return r;
  }

  MockScript script_;
};

}  // namespace crowdeval
