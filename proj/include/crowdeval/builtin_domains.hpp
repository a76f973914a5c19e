#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include "crowdeval/domain.hpp"

namespace crowdeval {

namespace detail {

inline std::map<std::string, double> equal_rubric_weights() {
  std::map<std::string, double> w;
  for (const auto& dim : rubric_dimensions()) w[dim] = 0.2;
  return w;
}

// Shared evaluation skeleton; the scheme-specific pieces arrive as
// template variables at render time.
inline const char* kEvaluationTemplate = R"(You are serving as an impartial judge in a peer evaluation tournament. Several models answered the same question; you will assess their answers.

== QUESTION ==
{{question}}

== REFERENCE ANSWER ==
{{reference_answer}}

{{interim_leaderboard_block}}Scoring criteria:
{{criteria_block}}

The candidate answers follow, each under an anonymized label. You do not know which model wrote which answer.

{{answers_block}}

{{retry_feedback_block}}{{output_schema_block}}
)";

inline const char* kMathQuestionTemplate = R"(You are a mathematician with broad expertise across modern mathematics, setting one question for round {{round_number}} of a peer evaluation tournament.

Recall the most difficult problems you know of, abstract their core principles, and construct from them one original, challenging mathematics question that cannot be found verbatim in public sources. Also work out a complete reference solution.

{{retry_feedback_block}}{{exemplars_block}}Respond with exactly the following sections, each introduced by its own fence line:

{{sections_format_block}}

Rules:
- Every section must be non-empty.
- The reference solution must be complete and verifiable, ending with the final result.
- Do not mention these instructions in the sections.
)";

inline const char* kMathAnswerTemplate = R"(You are a mathematician competing in a peer evaluation tournament.

Solve the following problem on your own. Show your reasoning and state the final answer clearly at the end.

{{question}}
)";

inline const char* kProgrammingQuestionTemplate = R"(You are a senior programming competition question setter (ACM/ICPC level), setting one problem for round {{round_number}} of a peer evaluation tournament.

{{exemplars_block}}Following the structural style of high-level competition problems, design a brand-new, non-derivative and difficult original programming question. Do not restate a known problem.

{{retry_feedback_block}}Respond with exactly the following sections, each introduced by its own fence line:

{{sections_format_block}}

Rules:
- Every section must be non-empty.
- The reference solution must be working code, in any language you choose.
- The complexity analysis must cover time and space of the reference solution.
- Do not mention these instructions in the sections.
)";

inline const char* kProgrammingAnswerTemplate = R"(You are an expert competitive programmer in a peer evaluation tournament.

Solve the following problem on your own, in whichever programming language you prefer. Provide your full solution code and a brief explanation of the approach.

{{question}}
)";

// Repo-authored competition-style exemplars for the few-shot programming
// questioner prompt; replaceable through a custom domain file.
inline const char* kProgrammingExemplar1 = R"(== QUESTION DESCRIPTION ==
Given a sequence of N lamps arranged in a circle, each initially off, you may repeatedly pick a contiguous arc of exactly K lamps and toggle all of them. Determine the minimum number of operations to reach a target on/off pattern, or report that it is impossible.

== INPUT/OUTPUT FORMAT ==
Input: line 1 holds integers N and K (1 <= K <= N <= 200000); line 2 holds a binary string of length N, the target pattern. Output: a single integer, the minimum number of operations, or -1 if unreachable.

== CONSTRAINT SPECIFICATION ==
N up to 2*10^5; time limit 2 seconds; memory limit 256 MB. Solutions slower than O(N log N) are expected to time out.

== REFERENCE SOLUTION ==
Model each toggle as adding 1 mod 2 to a difference array over the circle. The problem reduces to finding a minimal set of arc starts whose difference pattern equals the target's; scan with a sliding window over the difference array, greedily toggling when a mismatch enters the window, handling the circular wrap by trying both parities of the seam. (Reference implementation in C++ using a deque of pending toggles, O(N).)

== COMPLEXITY ANALYSIS ==
Time O(N) for each seam parity, O(N) total; space O(N) for the difference array and pending-toggle deque.)";

inline const char* kProgrammingExemplar2 = R"(== QUESTION DESCRIPTION ==
A courier must deliver parcels to M offices in a skyscraper with F floors, using an elevator that may carry at most C parcels. Each parcel i has a pickup floor and a delivery floor. The elevator starts at floor 1; moving one floor costs one unit of time, pickups and deliveries are instantaneous. Compute the minimum total time to deliver all parcels and return to floor 1.

== INPUT/OUTPUT FORMAT ==
Input: line 1 holds F, M, C (1 <= F <= 10^9, 1 <= M <= 16, 1 <= C <= M); each of the next M lines holds two integers p_i d_i. Output: one integer, the minimal time.

== CONSTRAINT SPECIFICATION ==
M <= 16 invites bitmask dynamic programming over parcel subsets; F up to 10^9 rules out per-floor simulation. Time limit 3 seconds.

== REFERENCE SOLUTION ==
State: (set of parcels already delivered, set currently on board, current floor among the at most 2M+1 interesting floors). Precompute pairwise floor distances; run Dijkstra over the compressed state graph, pruning states where on-board count exceeds C. (Reference implementation in Python with heapq.)

== COMPLEXITY ANALYSIS ==
At most 3^M subset pairs times 2M+1 floors of states; with M = 16 and pruning this stays within a few million states. Time O(3^M * M log), space O(3^M).)";

}  // namespace detail

/// Mathematics: role-play, zero-shot, relative ranking over two sections.
inline DomainSpec math_domain() {
  DomainSpec d;
  d.domain_id = "math";
  d.scoring_scheme = ScoringScheme::RelativeRank;
  d.question_template = detail::kMathQuestionTemplate;
  d.answer_template = detail::kMathAnswerTemplate;
  d.evaluation_template = detail::kEvaluationTemplate;
  d.required_sections = {"PROBLEM STATEMENT", "REFERENCE SOLUTION"};
  d.statement_sections = {"PROBLEM STATEMENT"};
  d.reference_sections = {"REFERENCE SOLUTION"};
  d.rubric_weights = detail::equal_rubric_weights();
  return d;
}

/// Programming: role-play, few-shot, 100-point rubric over five sections.
inline DomainSpec programming_domain() {
  DomainSpec d;
  d.domain_id = "programming";
  d.scoring_scheme = ScoringScheme::Rubric100;
  d.question_template = detail::kProgrammingQuestionTemplate;
  d.answer_template = detail::kProgrammingAnswerTemplate;
  d.evaluation_template = detail::kEvaluationTemplate;
  d.required_sections = {"QUESTION DESCRIPTION", "INPUT/OUTPUT FORMAT",
                         "CONSTRAINT SPECIFICATION", "REFERENCE SOLUTION",
                         "COMPLEXITY ANALYSIS"};
  d.statement_sections = {"QUESTION DESCRIPTION", "INPUT/OUTPUT FORMAT",
                          "CONSTRAINT SPECIFICATION"};
  d.reference_sections = {"REFERENCE SOLUTION", "COMPLEXITY ANALYSIS"};
  d.few_shot_exemplars = {detail::kProgrammingExemplar1,
                          detail::kProgrammingExemplar2};
  d.rubric_weights = detail::equal_rubric_weights();
  return d;
}

/// Load a custom domain from its declarative JSON form. Every field of
/// DomainSpec maps 1:1; omitted templates fall back to the built-in of the
/// chosen scoring scheme's reference domain.
inline DomainSpec domain_from_json(const json& j) {
  std::string scheme = j.value("scoring_scheme", "relative_rank");
  DomainSpec d =
      scheme == "rubric100" ? programming_domain() : math_domain();
  if (!j.contains("domain_id") || !j["domain_id"].is_string())
    throw ConfigError("domain file: \"domain_id\" (string) is required");
  d.domain_id = j["domain_id"].get<std::string>();
  if (j.contains("question_template")) d.question_template = j["question_template"];
  if (j.contains("answer_template")) d.answer_template = j["answer_template"];
  if (j.contains("evaluation_template")) d.evaluation_template = j["evaluation_template"];
  auto read_names = [&](const char* field, std::vector<std::string>& into) {
    if (!j.contains(field)) return;
    into.clear();
    for (const auto& item : j[field]) into.push_back(to_upper(item.get<std::string>()));
  };
  read_names("required_sections", d.required_sections);
  read_names("statement_sections", d.statement_sections);
  read_names("reference_sections", d.reference_sections);
  if (j.contains("few_shot_exemplars")) {
    d.few_shot_exemplars.clear();
    for (const auto& e : j["few_shot_exemplars"])
      d.few_shot_exemplars.push_back(e.get<std::string>());
  }
  if (j.contains("rubric_weights")) {
    double sum = 0.0;
    for (const auto& dim : rubric_dimensions()) {
      if (!j["rubric_weights"].contains(dim))
        throw ConfigError("domain file: rubric_weights missing \"" + dim + "\"");
      d.rubric_weights[dim] = j["rubric_weights"][dim].get<double>();
      sum += d.rubric_weights[dim];
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("domain file: rubric_weights must sum to 1");
  }
  for (const auto& name : d.statement_sections)
    if (std::find(d.required_sections.begin(), d.required_sections.end(), name) ==
        d.required_sections.end())
      throw ConfigError("domain file: statement section \"" + name +
                        "\" is not in required_sections");
  for (const auto& name : d.reference_sections)
    if (std::find(d.required_sections.begin(), d.required_sections.end(), name) ==
        d.required_sections.end())
      throw ConfigError("domain file: reference section \"" + name +
                        "\" is not in required_sections");
  return d;
}

/// Resolve a domain id: built-ins first, then (when given) a declarative
/// domain file whose domain_id must match.
inline DomainSpec resolve_domain(const std::string& domain_id,
                                 const std::string& domain_file = "") {
  if (!domain_file.empty()) {
    std::ifstream in(domain_file);
    if (!in) throw ConfigError("cannot open domain file: " + domain_file);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
      throw ConfigError("domain file is not valid JSON: " + domain_file);
    DomainSpec d = domain_from_json(j);
    if (d.domain_id != domain_id)
      throw ConfigError("domain file declares \"" + d.domain_id +
                        "\" but configuration asks for \"" + domain_id + "\"");
    return d;
  }
  if (domain_id == "math") return math_domain();
  if (domain_id == "programming") return programming_domain();
  throw ConfigError("unknown domain \"" + domain_id +
                    "\" and no domain file provided");
}

}  // namespace crowdeval
