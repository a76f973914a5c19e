#pragma once

#include <chrono>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "crowdeval/backends.hpp"
#include "crowdeval/util.hpp"

namespace crowdeval {

struct RetryPolicy {
  int max_attempts = 3;          // transport attempts per completion
  int max_prompt_attempts = 3;   // validation re-prompts per logical call
  double base_delay_s = 2.0;
  double max_delay_s = 60.0;
};

using Sleeper = std::function<void(double /*ms*/)>;

inline void default_sleeper(double ms) {
  if (ms > 0)
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

/// Full-jitter backoff before attempt `next_attempt` (2-based): uniform in
/// [0, min(cap, base * 2^(attempt-1))].
inline double backoff_with_jitter(const RetryPolicy& policy, int next_attempt,
                                  std::mt19937_64& rng) {
  double ceiling = policy.base_delay_s * 1000.0;
  for (int i = 2; i < next_attempt; ++i) ceiling *= 2.0;
  if (ceiling > policy.max_delay_s * 1000.0) ceiling = policy.max_delay_s * 1000.0;
  if (ceiling <= 0.0) return 0.0;
  // 53-bit mantissa fraction keeps this exactly reproducible
  double frac = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return ceiling * frac;
}

struct AttemptRecord {
  int transport_attempt = 1;
  CompletionResult result;
  double backoff_ms = 0.0;  // delay taken before the *next* attempt
};

struct RetryOutcome {
  bool ok = false;
  bool exhausted = false;  // retries used up (vs. fatal error)
  CompletionResult final;
  std::vector<AttemptRecord> attempts;
};

/// Retries retryable failures only; fatal errors stop immediately. Every
/// attempt is recorded so the orchestrator can log it. Jitter comes from
/// the supplied rng so mock runs stay deterministic.
inline RetryOutcome complete_with_retries(Backend& backend,
                                          const std::string& prompt,
                                          const SamplingParams& params,
                                          CallContext ctx,
                                          const RetryPolicy& policy,
                                          std::mt19937_64& jitter_rng,
                                          const Sleeper& sleep = default_sleeper) {
  RetryOutcome outcome;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    ctx.transport_attempt = attempt;
    CompletionResult result = backend.complete(prompt, params, ctx);
    if (result.ok && trim_view(result.text).empty()) {
      result.ok = false;
      result.error = CallErrorKind::Empty;
      result.error_detail = "provider returned empty content";
    }
    AttemptRecord record{attempt, result, 0.0};
    if (result.ok) {
      outcome.ok = true;
      outcome.final = std::move(result);
      outcome.attempts.push_back(std::move(record));
      return outcome;
    }
    const bool retry = result.retryable() && attempt < policy.max_attempts;
    if (retry) {
      record.backoff_ms = backoff_with_jitter(policy, attempt + 1, jitter_rng);
      sleep(record.backoff_ms);
    }
    outcome.final = result;
    outcome.attempts.push_back(std::move(record));
    if (!retry) {
      outcome.exhausted = result.retryable();  // budget ran out
      return outcome;
    }
  }
  return outcome;  // unreachable
}

}  // namespace crowdeval
