#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "crowdeval/backends.hpp"
#include "crowdeval/builtin_domains.hpp"
#include "crowdeval/retry.hpp"
#include "crowdeval/types.hpp"
#include "crowdeval/util.hpp"

namespace crowdeval {

constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kEngineVersion = "crowdeval 0.1.0";

struct PhaseSampling {
  SamplingParams question{1.0, 4096};
  SamplingParams answer{0.7, 4096};
  SamplingParams evaluation{0.2, 4096};
};

struct RunConfig {
  std::string experiment = "experiment";
  std::string domain_id = "math";
  std::string domain_file;  // optional declarative domain plugin
  int num_runs = 3;
  std::uint64_t seed = 0;
  bool seed_was_generated = false;
  std::string output_dir = "out";
  std::vector<ModelSpec> models;
  std::map<std::string, BackendConfig> backends;
  std::vector<int> consistency_k;  // empty -> {n/2}
  RetryPolicy retry;
  PhaseSampling sampling;
  bool shuffle_questioners = false;
  bool inject_interim_leaderboard = false;

  int n() const { return static_cast<int>(models.size()); }

  std::vector<std::string> roster() const {
    std::vector<std::string> ids;
    for (const auto& m : models) ids.push_back(m.model_id);
    return ids;
  }

  std::vector<int> effective_k() const {
    if (!consistency_k.empty()) return consistency_k;
    int k = n() / 2;
    if (k < 1) k = 1;
    if (k > n() - 2) k = n() - 2;
    return {k};
  }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline BackendConfig backend_from_json(const std::string& id, const json& j) {
  BackendConfig b;
  b.backend_id = id;
  b.kind = j.value("kind", "live");
  b.endpoint_url = j.value("endpoint_url", "");
  b.model_name = j.value("model_name", "");
  b.api_key_env = j.value("api_key_env", "");
  b.timeout_s = j.value("timeout_s", 120.0);
  b.max_tokens = j.value("max_tokens", 4096);
  b.mock_script_path = j.value("mock_script_path", "");
  if (j.contains("mock_script")) b.mock_script = j["mock_script"];
  b.max_in_flight = j.value("max_in_flight", 4);
  return b;
}

inline json backend_to_json(const BackendConfig& b) {
  json j;
  j["kind"] = b.kind;
  if (!b.endpoint_url.empty()) j["endpoint_url"] = b.endpoint_url;
  if (!b.model_name.empty()) j["model_name"] = b.model_name;
  if (!b.api_key_env.empty()) j["api_key_env"] = b.api_key_env;
  j["timeout_s"] = b.timeout_s;
  j["max_tokens"] = b.max_tokens;
  if (!b.mock_script_path.empty()) j["mock_script_path"] = b.mock_script_path;
  if (b.mock_script) j["mock_script"] = *b.mock_script;
  j["max_in_flight"] = b.max_in_flight;
  return j;
}

inline SamplingParams sampling_from_json(const json& j, SamplingParams defaults) {
  SamplingParams p = defaults;
  if (j.contains("temperature")) p.temperature = j["temperature"].get<double>();
  if (j.contains("max_tokens")) p.max_tokens = j["max_tokens"].get<int>();
  return p;
}

using EnvLookup = std::function<const char*(const char*)>;

inline EnvLookup process_env() {
  return [](const char* name) { return std::getenv(name); };
}

}  // namespace detail

/// Scalar overrides: CROWDEVAL_<KEY> beats the config file. Supported keys:
/// EXPERIMENT, DOMAIN, NUM_RUNS, SEED, OUTPUT_DIR, SHUFFLE_QUESTIONERS,
/// INJECT_INTERIM_LEADERBOARD.
inline void apply_env_overrides(RunConfig& config,
                                const detail::EnvLookup& env = detail::process_env()) {
  auto get = [&](const char* key) -> std::optional<std::string> {
    std::string name = std::string("CROWDEVAL_") + key;
    const char* v = env(name.c_str());
    if (v && *v) return std::string(v);
    return std::nullopt;
  };
  if (auto v = get("EXPERIMENT")) config.experiment = *v;
  if (auto v = get("DOMAIN")) config.domain_id = *v;
  if (auto v = get("OUTPUT_DIR")) config.output_dir = *v;
  try {
    if (auto v = get("NUM_RUNS")) config.num_runs = std::stoi(*v);
    if (auto v = get("SEED")) {
      config.seed = std::stoull(*v);
      config.seed_was_generated = false;
    }
  } catch (const std::exception&) {
    throw ConfigError("CROWDEVAL_NUM_RUNS / CROWDEVAL_SEED must be numeric");
  }
  auto truthy = [](const std::string& s) { return s == "1" || s == "true" || s == "yes"; };
  if (auto v = get("SHUFFLE_QUESTIONERS")) config.shuffle_questioners = truthy(*v);
  if (auto v = get("INJECT_INTERIM_LEADERBOARD"))
    config.inject_interim_leaderboard = truthy(*v);
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  int version = j.value("schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion)
    throw ConfigError("unsupported config schema_version " + std::to_string(version));
  c.experiment = j.value("experiment", c.experiment);
  c.domain_id = j.value("domain", c.domain_id);
  c.domain_file = j.value("domain_file", "");
  c.num_runs = j.value("num_runs", 3);
  if (j.contains("seed")) {
    c.seed = j["seed"].get<std::uint64_t>();
  } else {
    c.seed = std::random_device{}();
    c.seed_was_generated = true;
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("backends"))
    for (auto& [id, bj] : j["backends"].items())
      c.backends[id] = detail::backend_from_json(id, bj);
  if (j.contains("models")) {
    for (const auto& mj : j["models"]) {
      ModelSpec m;
      m.model_id = mj.value("model_id", "");
      m.display_name = mj.value("display_name", m.model_id);
      m.backend_ref = mj.value("backend_ref", "");
      c.models.push_back(std::move(m));
    }
  }
  if (j.contains("consistency_k"))
    for (const auto& k : j["consistency_k"]) c.consistency_k.push_back(k.get<int>());
  if (j.contains("retry")) {
    const json& r = j["retry"];
    c.retry.max_attempts = r.value("max_attempts", 3);
    c.retry.max_prompt_attempts = r.value("max_prompt_attempts", 3);
    c.retry.base_delay_s = r.value("base_delay_s", 2.0);
    c.retry.max_delay_s = r.value("max_delay_s", 60.0);
  }
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    if (s.contains("question"))
      c.sampling.question = detail::sampling_from_json(s["question"], c.sampling.question);
    if (s.contains("answer"))
      c.sampling.answer = detail::sampling_from_json(s["answer"], c.sampling.answer);
    if (s.contains("evaluation"))
      c.sampling.evaluation =
          detail::sampling_from_json(s["evaluation"], c.sampling.evaluation);
  }
  c.shuffle_questioners = j.value("shuffle_questioners", false);
  c.inject_interim_leaderboard = j.value("inject_interim_leaderboard", false);
  return c;
}

/// Canonical JSON form of the effective configuration. Deterministic given
/// the same settings; also what the log header embeds. output_dir is
/// excluded so relocated experiments still resume.
inline json config_to_json(const RunConfig& c, bool include_output_dir = true) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["experiment"] = c.experiment;
  j["domain"] = c.domain_id;
  if (!c.domain_file.empty()) j["domain_file"] = c.domain_file;
  j["num_runs"] = c.num_runs;
  j["seed"] = c.seed;
  if (include_output_dir) j["output_dir"] = c.output_dir;
  json backends = json::object();
  for (auto& [id, b] : c.backends) backends[id] = detail::backend_to_json(b);
  j["backends"] = std::move(backends);
  json models = json::array();
  for (const auto& m : c.models) {
    models.push_back(json{{"model_id", m.model_id},
                          {"display_name", m.display_name},
                          {"backend_ref", m.backend_ref}});
  }
  j["models"] = std::move(models);
  j["consistency_k"] = c.effective_k();
  j["retry"] = json{{"max_attempts", c.retry.max_attempts},
                    {"max_prompt_attempts", c.retry.max_prompt_attempts},
                    {"base_delay_s", c.retry.base_delay_s},
                    {"max_delay_s", c.retry.max_delay_s}};
  j["sampling"] = json{
      {"question", json{{"temperature", c.sampling.question.temperature},
                        {"max_tokens", c.sampling.question.max_tokens}}},
      {"answer", json{{"temperature", c.sampling.answer.temperature},
                      {"max_tokens", c.sampling.answer.max_tokens}}},
      {"evaluation", json{{"temperature", c.sampling.evaluation.temperature},
                          {"max_tokens", c.sampling.evaluation.max_tokens}}},
      {"note", "sampling defaults are engine choices, not sourced from any "
               "publication"}};
  j["shuffle_questioners"] = c.shuffle_questioners;
  j["inject_interim_leaderboard"] = c.inject_interim_leaderboard;
  return j;
}

/// Content digest of the semantic configuration (output paths excluded).
inline std::string config_digest(const RunConfig& c) {
  return hex64(fnv1a64(config_to_json(c, /*include_output_dir=*/false).dump()));
}

inline RunConfig load_config(const std::string& path, bool with_env = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
  RunConfig c = config_from_json(j);
  if (with_env) apply_env_overrides(c);
  return c;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ConfigReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

inline ConfigReport validate_config(const RunConfig& c) {
  ConfigReport report;
  auto err = [&](std::string msg) { report.errors.push_back(std::move(msg)); };
  auto warn = [&](std::string msg) { report.warnings.push_back(std::move(msg)); };

  const int n = c.n();
  if (n < 3)
    err("pool size n >= 3 required (cross-evaluation needs at least 2 answerers "
        "and 2 evaluators per answer); got n=" + std::to_string(n));
  if (n > 27) err("pool size n <= 27 required (single-letter answer labels)");

  std::set<std::string> ids;
  for (const auto& m : c.models) {
    if (m.model_id.empty()) err("every model needs a non-empty model_id");
    if (!ids.insert(m.model_id).second)
      err("duplicate model_id: " + m.model_id);
    if (!c.backends.count(m.backend_ref))
      err("model " + m.model_id + ": backend_ref \"" + m.backend_ref +
          "\" not found in backends");
  }

  for (auto& [id, b] : c.backends) {
    if (b.kind == "live") {
      if (b.endpoint_url.empty())
        err("backend " + id + ": live backend requires endpoint_url");
      if (b.api_key_env.empty())
        err("backend " + id + ": live backend requires api_key_env");
      if (b.model_name.empty())
        warn("backend " + id + ": live backend has no model_name");
    } else if (b.kind == "mock") {
      if (b.mock_script_path.empty() && !b.mock_script)
        err("backend " + id +
            ": mock backend requires mock_script_path or an inline mock_script");
    } else {
      err("backend " + id + ": kind must be \"live\" or \"mock\", got \"" +
          b.kind + "\"");
    }
    if (b.timeout_s <= 0) err("backend " + id + ": timeout must be > 0");
    if (b.max_in_flight < 1) err("backend " + id + ": max_in_flight must be >= 1");
  }

  if (c.num_runs < 1) err("num_runs must be >= 1");
  if (c.retry.max_attempts < 1) err("retry.max_attempts must be >= 1");
  if (c.retry.max_prompt_attempts < 1) err("retry.max_prompt_attempts must be >= 1");
  if (c.retry.base_delay_s < 0 || c.retry.max_delay_s < 0)
    err("retry delays must be >= 0");

  for (int k : c.consistency_k) {
    if (k < 1 || (n >= 3 && k > n - 2))
      err("consistency k = " + std::to_string(k) + " out of range: k must be in "
          "[1, n-2] (an answerer-evaluator ranks at most n-2 answers); n=" +
          std::to_string(n));
  }

  try {
    DomainSpec domain = resolve_domain(c.domain_id, c.domain_file);
    // dry-run every template so a broken placeholder fails here, not mid-run
    render_question_prompt(domain, {0, {}});
    QuestionArtifact q;
    q.domain_id = domain.domain_id;
    q.statement = "sample statement";
    q.reference_answer = "sample reference";
    render_answer_prompt(domain, q);
    render_evaluation_prompt(domain, q, {{"A", "sample answer"}});
  } catch (const ConfigError& e) {
    err(e.what());
  } catch (const TemplateVarError& e) {
    err(e.what());
  }

  if (c.seed_was_generated)
    warn("no seed in config; generated seed " + std::to_string(c.seed) +
         " (persisted in logs and reports)");
  return report;
}

/// Swap every backend for a synthesized mock (the `--mock` flag): same
/// roster, fully deterministic content derived from the run seed.
inline void force_mock_backends(RunConfig& c) {
  for (auto& [id, b] : c.backends) {
    b.kind = "mock";
    b.endpoint_url.clear();
    b.api_key_env.clear();
    b.mock_script_path.clear();
    b.mock_script = json{{"seed", c.seed}, {"default", json{{"respond", json{{"generate", "auto"}}}}}};
  }
}

}  // namespace crowdeval
