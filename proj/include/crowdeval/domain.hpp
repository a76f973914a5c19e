#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdeval/types.hpp"
#include "crowdeval/util.hpp"

namespace crowdeval {

// ---------------------------------------------------------------------------
// DomainSpec: a declarative bundle of templates, section requirements and
// scoring scheme. Built-ins cover mathematics and programming; custom
// domains load from a JSON file with the same fields.
// ---------------------------------------------------------------------------

struct DomainSpec {
  std::string domain_id;
  ScoringScheme scoring_scheme = ScoringScheme::RelativeRank;
  std::string question_template;
  std::string answer_template;
  std::string evaluation_template;
  std::vector<std::string> required_sections;   // canonical upper-case names
  std::vector<std::string> statement_sections;  // subset shown to answerers
  std::vector<std::string> reference_sections;  // subset shown to evaluators only
  std::vector<std::string> few_shot_exemplars;
  std::map<std::string, double> rubric_weights;  // five dims, normalized
};

/// Non-throwing validation outcome: empty error list means success.
struct ValidationErrors {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
  std::string joined() const {
    std::string out;
    for (const auto& e : errors) {
      if (!out.empty()) out += "; ";
      out += e;
    }
    return out;
  }
};

template <typename T>
struct Parsed {
  std::optional<T> value;
  ValidationErrors errors;
  bool ok() const { return value.has_value(); }
};

// ---------------------------------------------------------------------------
// Template rendering. Placeholders are {{name}}; every placeholder must
// resolve or rendering throws TemplateVarError naming it.
// ---------------------------------------------------------------------------

inline std::string render_template(const std::string& tmpl,
                                   const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    std::string name = trim(tmpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end())
      throw TemplateVarError("template placeholder has no value: " + name);
    out += it->second;
    pos = close + 2;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompt fragments
// ---------------------------------------------------------------------------

namespace detail {

inline std::string sections_format_block(const DomainSpec& domain) {
  std::string out;
  for (const auto& name : domain.required_sections) {
    out += "== " + name + " ==\n(" + "write the " + name + " here, non-empty)\n\n";
  }
  return trim(out);
}

inline std::string exemplars_block(const DomainSpec& domain) {
  if (domain.few_shot_exemplars.empty()) return "";
  std::string out = "Study the style of these exemplar problems before writing your own:\n\n";
  for (std::size_t i = 0; i < domain.few_shot_exemplars.size(); ++i) {
    out += "--- exemplar " + std::to_string(i + 1) + " ---\n";
    out += trim(domain.few_shot_exemplars[i]);
    out += "\n\n";
  }
  return out;
}

inline std::string criteria_block(const DomainSpec& domain) {
  if (domain.scoring_scheme == ScoringScheme::RelativeRank) {
    return "Rank every candidate answer from best to worst against the reference "
           "answer. Judge correctness of the final result first, then rigor and "
           "clarity of the reasoning. Produce a strict total order over the "
           "labels: ties are not allowed.";
  }
  std::string out =
      "Score every candidate answer on a 100-point scale across five dimensions, "
      "each an integer from 0 to 100:\n";
  for (const auto& dim : rubric_dimensions()) {
    double w = 0.2;
    auto it = domain.rubric_weights.find(dim);
    if (it != domain.rubric_weights.end()) w = it->second;
    out += "- " + dim + " (weight " + format_double(w) + ")\n";
  }
  out += "Judge against the reference answer. The total for each answer is the "
         "weighted mean of its five dimension scores.";
  return out;
}

inline std::string output_schema_block(const DomainSpec& domain,
                                       const std::vector<std::string>& labels) {
  std::string label_list;
  for (const auto& l : labels) {
    if (!label_list.empty()) label_list += ", ";
    label_list += l;
  }
  if (domain.scoring_scheme == ScoringScheme::RelativeRank) {
    return "OUTPUT SCHEMA (RANKING): after your analysis, emit exactly one fenced "
           "json block of this shape:\n\n"
           "```json\n"
           "{\"ordering\": [\"<best label>\", \"...\", \"<worst label>\"], "
           "\"rationale\": \"<one short paragraph>\"}\n"
           "```\n\n"
           "\"ordering\" must list every presented label exactly once. "
           "Presented labels: " + label_list + ".";
  }
  return "OUTPUT SCHEMA (RUBRIC): after your analysis, emit exactly one fenced "
         "json block of this shape:\n\n"
         "```json\n"
         "{\"scores\": {\"<label>\": {\"correctness\": 0, \"efficiency\": 0, "
         "\"readability\": 0, \"structure\": 0, \"memory\": 0}}, "
         "\"rationale\": \"<one short paragraph>\"}\n"
         "```\n\n"
         "\"scores\" must contain every presented label exactly once, each with "
         "all five integer dimensions in 0-100. Presented labels: " + label_list + ".";
}

inline std::string retry_feedback_block(const ValidationErrors& errors) {
  if (errors.ok()) return "";
  std::string out =
      "Your previous response was rejected for these reasons; fix every one of "
      "them this time:\n";
  for (const auto& e : errors.errors) out += "- " + e + "\n";
  out += "\n";
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct QuestionPromptContext {
  int round_index = 0;
  ValidationErrors retry_feedback;  // empty on the first attempt
};

inline std::string render_question_prompt(const DomainSpec& domain,
                                          const QuestionPromptContext& ctx) {
  return render_template(
      domain.question_template,
      {{"round_number", std::to_string(ctx.round_index + 1)},
       {"sections_format_block", detail::sections_format_block(domain)},
       {"exemplars_block", detail::exemplars_block(domain)},
       {"retry_feedback_block", detail::retry_feedback_block(ctx.retry_feedback)}});
}

/// Parse the `== NAME ==` fenced sections out of a raw question response.
/// All required sections must be present and non-empty; anything else is
/// reported as a machine-readable error list for the retry prompt.
inline Parsed<QuestionArtifact> validate_question(const DomainSpec& domain,
                                                  const std::string& raw) {
  Parsed<QuestionArtifact> out;
  std::map<std::string, std::string> sections;
  for (auto& [name, body] : parse_named_sections(raw)) {
    if (!sections.count(name)) sections[name] = body;
  }
  for (const auto& name : domain.required_sections) {
    auto it = sections.find(name);
    if (it == sections.end())
      out.errors.errors.push_back("missing section: " + name);
    else if (trim(it->second).empty())
      out.errors.errors.push_back("empty section: " + name);
  }
  if (!out.errors.ok()) return out;

  QuestionArtifact artifact;
  artifact.domain_id = domain.domain_id;
  artifact.sections = sections;
  artifact.raw_response = raw;

  auto join = [&](const std::vector<std::string>& names) {
    if (names.size() == 1) return sections[names.front()];
    std::string joined;
    for (const auto& name : names) {
      joined += "== " + name + " ==\n" + sections[name] + "\n\n";
    }
    return trim(joined);
  };
  artifact.statement = join(domain.statement_sections);
  artifact.reference_answer = join(domain.reference_sections);
  out.value = std::move(artifact);
  return out;
}

inline std::string render_answer_prompt(const DomainSpec& domain,
                                        const QuestionArtifact& question) {
  return render_template(domain.answer_template,
                         {{"question", question.statement}});
}

struct LabeledAnswer {
  std::string label;
  std::string text;
};

struct EvaluationPromptContext {
  std::string interim_leaderboard_block;  // "" unless injection is enabled
  ValidationErrors retry_feedback;
};

inline std::string render_evaluation_prompt(
    const DomainSpec& domain, const QuestionArtifact& question,
    const std::vector<LabeledAnswer>& labeled_answers,
    const EvaluationPromptContext& ctx = {}) {
  std::string answers_block;
  std::vector<std::string> labels;
  for (const auto& a : labeled_answers) {
    labels.push_back(a.label);
    answers_block += "== ANSWER " + a.label + " ==\n" + trim(a.text) + "\n\n";
  }
  return render_template(
      domain.evaluation_template,
      {{"question", question.statement},
       {"reference_answer", question.reference_answer},
       {"criteria_block", detail::criteria_block(domain)},
       {"answers_block", trim(answers_block)},
       {"output_schema_block", detail::output_schema_block(domain, labels)},
       {"interim_leaderboard_block", ctx.interim_leaderboard_block},
       {"retry_feedback_block", detail::retry_feedback_block(ctx.retry_feedback)}});
}

// ---------------------------------------------------------------------------
// Evaluation payload parsing
// ---------------------------------------------------------------------------

namespace detail {

/// Candidate JSON documents hiding in a model response: fenced blocks
/// (preferred, last first), then the whole text, then the outermost
/// brace-delimited slice.
inline std::vector<json> candidate_json_documents(const std::string& raw) {
  std::vector<json> docs;
  auto try_parse = [&](std::string_view text) {
    json parsed = json::parse(text, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) docs.push_back(std::move(parsed));
  };
  auto fences = extract_code_fences(raw);
  for (auto it = fences.rbegin(); it != fences.rend(); ++it) try_parse(trim_view(*it));
  try_parse(trim_view(raw));
  std::size_t open = raw.find('{');
  std::size_t close = raw.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open)
    try_parse(std::string_view(raw).substr(open, close - open + 1));
  return docs;
}

inline void parse_relative_rank(const json& doc,
                                const std::vector<std::string>& expected_labels,
                                Parsed<EvaluationPayload>& out) {
  EvaluationPayload payload;
  payload.scheme = ScoringScheme::RelativeRank;
  const json& ordering = doc.at("ordering");
  if (!ordering.is_array()) {
    out.errors.errors.push_back("\"ordering\" must be an array of labels");
    return;
  }
  std::set<std::string> seen;
  std::set<std::string> expected(expected_labels.begin(), expected_labels.end());
  for (const auto& item : ordering) {
    if (!item.is_string()) {
      out.errors.errors.push_back(
          "\"ordering\" entries must be single labels; nested groups (ties) "
          "are not allowed");
      continue;
    }
    std::string label = trim(item.get<std::string>());
    if (seen.count(label)) {
      out.errors.errors.push_back("duplicate label in ordering: " + label);
      continue;
    }
    seen.insert(label);
    if (!expected.count(label)) {
      out.errors.errors.push_back("unknown label in ordering: " + label);
      continue;
    }
    payload.ordering.push_back(label);
  }
  for (const auto& label : expected_labels)
    if (!seen.count(label))
      out.errors.errors.push_back("missing label in ordering: " + label);
  if (doc.contains("rationale") && doc["rationale"].is_string())
    payload.rationale = doc["rationale"].get<std::string>();
  if (out.errors.ok()) out.value = std::move(payload);
}

inline void parse_rubric(const json& doc,
                         const std::vector<std::string>& expected_labels,
                         const std::map<std::string, double>& weights,
                         Parsed<EvaluationPayload>& out) {
  EvaluationPayload payload;
  payload.scheme = ScoringScheme::Rubric100;
  const json& scores = doc.at("scores");
  if (!scores.is_object()) {
    out.errors.errors.push_back("\"scores\" must be an object keyed by label");
    return;
  }
  std::set<std::string> expected(expected_labels.begin(), expected_labels.end());
  std::set<std::string> mentioned;
  for (auto& [label, entry] : scores.items()) {
    if (!expected.count(label)) {
      out.errors.errors.push_back("unknown label in scores: " + label);
      continue;
    }
    mentioned.insert(label);
    if (!entry.is_object()) {
      out.errors.errors.push_back("scores for label " + label +
                                  " must be an object of dimensions");
      continue;
    }
    RubricScores rubric;
    double weighted = 0.0;
    bool dims_ok = true;
    for (const auto& dim : rubric_dimensions()) {
      if (!entry.contains(dim) || !entry[dim].is_number()) {
        out.errors.errors.push_back("label " + label +
                                    ": missing or non-numeric dimension \"" + dim + "\"");
        dims_ok = false;
        continue;
      }
      double v = entry[dim].get<double>();
      if (v < 0.0 || v > 100.0) {
        out.errors.errors.push_back("label " + label + ": dimension \"" + dim +
                                    "\" = " + format_double(v) +
                                    " is outside [0,100]");
        dims_ok = false;
        continue;
      }
      rubric.dimensions[dim] = v;
      double w = 0.2;
      auto it = weights.find(dim);
      if (it != weights.end()) w = it->second;
      weighted += w * v;
    }
    if (!dims_ok) continue;
    rubric.total = std::round(weighted);
    if (entry.contains("total") && entry["total"].is_number()) {
      double reported = entry["total"].get<double>();
      if (std::abs(reported - rubric.total) > 0.5) {
        payload.discrepancies.push_back(
            "label " + label + ": reported total " + format_double(reported) +
            " does not match derived total " + format_double(rubric.total) +
            "; derived value kept");
      }
    }
    payload.per_answer[label] = std::move(rubric);
  }
  for (const auto& label : expected_labels)
    if (!mentioned.count(label))
      out.errors.errors.push_back("missing label in scores: " + label);
  if (!out.errors.ok()) return;
  if (doc.contains("rationale") && doc["rationale"].is_string())
    payload.rationale = doc["rationale"].get<std::string>();
  out.value = std::move(payload);
}

}  // namespace detail

/// Extract and validate the structured evaluation block from a raw model
/// response. Tolerant of surrounding prose; intolerant of missing,
/// duplicated, unknown or out-of-range entries.
inline Parsed<EvaluationPayload> parse_evaluation(
    const DomainSpec& domain, const std::string& raw,
    const std::vector<std::string>& expected_labels) {
  Parsed<EvaluationPayload> out;
  const char* key =
      domain.scoring_scheme == ScoringScheme::RelativeRank ? "ordering" : "scores";
  for (const auto& doc : detail::candidate_json_documents(raw)) {
    if (!doc.contains(key)) continue;
    if (domain.scoring_scheme == ScoringScheme::RelativeRank)
      detail::parse_relative_rank(doc, expected_labels, out);
    else
      detail::parse_rubric(doc, expected_labels, domain.rubric_weights, out);
    return out;  // first candidate with the right key decides
  }
  out.errors.errors.push_back(
      std::string("no structured block found: expected a fenced json object "
                  "with an \"") + key + "\" field");
  return out;
}

}  // namespace crowdeval
