#include <catch2/catch_amalgamated.hpp>

#include "crowdeval/builtin_domains.hpp"
#include "crowdeval/mock_backend.hpp"
#include "crowdeval/retry.hpp"

using namespace crowdeval;

namespace {

BackendConfig mock_cfg() {
  BackendConfig b;
  b.backend_id = "b1";
  b.kind = "mock";
  return b;
}

CallContext ctx_for(int phase, const std::string& actor, int transport_attempt = 1) {
  CallContext c;
  c.phase = phase;
  c.actor = actor;
  c.transport_attempt = transport_attempt;
  return c;
}

RetryPolicy fast_policy() {
  RetryPolicy p;
  p.base_delay_s = 0.0;
  p.max_delay_s = 0.0;
  return p;
}

}  // namespace

TEST_CASE("error classification") {
  CompletionResult r;
  r.error = CallErrorKind::Provider;
  r.http_status = 429;
  CHECK(r.retryable());
  r.http_status = 408;
  CHECK(r.retryable());
  r.http_status = 503;
  CHECK(r.retryable());
  r.http_status = 401;
  CHECK_FALSE(r.retryable());
  r.http_status = 404;
  CHECK_FALSE(r.retryable());
  r.error = CallErrorKind::Timeout;
  CHECK(r.retryable());
  r.error = CallErrorKind::Empty;
  CHECK(r.retryable());
  r.error = CallErrorKind::Config;
  CHECK_FALSE(r.retryable());
  r.error = CallErrorKind::None;
  CHECK_FALSE(r.retryable());
}

TEST_CASE("mock script literal response and latency") {
  MockScript script = MockScript::from_json(json{
      {"seed", 1},
      {"rules", json::array({json{{"match", json{{"phase", 2}}},
                                  {"respond", json{{"text", "PONG"},
                                                   {"latency_ms", 7.5}}}}})}});
  MockBackend backend(mock_cfg(), script);
  auto r = backend.complete("anything", {}, ctx_for(2, "m1"));
  CHECK(r.ok);
  CHECK(r.text == "PONG");
  CHECK(r.latency_ms == 7.5);
}

TEST_CASE("mock rules match on context fields in order") {
  MockScript script = MockScript::from_json(json{
      {"rules", json::array(
                    {json{{"match", json{{"actor", "m2"}, {"transport_attempt", 1}}},
                          {"fail", json{{"kind", "empty"}}}},
                     json{{"match", json{{"actor", "m2"}}},
                          {"respond", json{{"text", "second try"}}}},
                     json{{"match", json{{"prompt_contains", "magic"}}},
                          {"respond", json{{"text", "matched prompt"}}}}})}});
  MockBackend backend(mock_cfg(), script);

  auto first = backend.complete("x", {}, ctx_for(2, "m2", 1));
  CHECK_FALSE(first.ok);
  CHECK(first.error == CallErrorKind::Empty);
  auto second = backend.complete("x", {}, ctx_for(2, "m2", 2));
  CHECK(second.text == "second try");
  auto prompted = backend.complete("some magic words", {}, ctx_for(2, "m9"));
  CHECK(prompted.text == "matched prompt");
  auto fallback = backend.complete("plain", {}, ctx_for(2, "m9"));
  CHECK(fallback.ok);  // default synthesizes an answer
  CHECK(contains(fallback.text, "m9"));
}

TEST_CASE("mock failure kinds map to error classes") {
  auto fail_with = [](const std::string& kind, int status = 500) {
    MockScript s = MockScript::from_json(json{
        {"rules",
         json::array({json{{"fail", json{{"kind", kind}, {"http_status", status}}}}})}});
    MockBackend backend(mock_cfg(), s);
    return backend.complete("p", {}, ctx_for(2, "m1"));
  };
  CHECK(fail_with("timeout").error == CallErrorKind::Timeout);
  CHECK(fail_with("transport").error == CallErrorKind::Transport);
  CHECK(fail_with("empty").error == CallErrorKind::Empty);
  auto provider = fail_with("http", 429);
  CHECK(provider.error == CallErrorKind::Provider);
  CHECK(provider.http_status == 429);
}

TEST_CASE("synthesized question covers every fenced section in the prompt") {
  MockBackend backend(mock_cfg(), MockScript::auto_script(5));
  DomainSpec domain = programming_domain();
  std::string prompt = render_question_prompt(domain, {0, {}});
  auto r = backend.complete(prompt, {}, ctx_for(1, "m1"));
  auto parsed = validate_question(domain, r.text);
  REQUIRE(parsed.ok());
  CHECK(parsed.value->sections.size() == 5);
}

TEST_CASE("synthesized evaluation ranks exactly the presented labels") {
  MockBackend backend(mock_cfg(), MockScript::auto_script(5));
  DomainSpec domain = math_domain();
  QuestionArtifact q;
  q.statement = "question";
  q.reference_answer = "reference";
  auto prompt = render_evaluation_prompt(
      domain, q, {{"A", "alpha answer"}, {"B", "beta answer"}, {"C", "gamma"}});
  auto r = backend.complete(prompt, {}, ctx_for(3, "m1"));
  auto parsed = parse_evaluation(domain, r.text, {"A", "B", "C"});
  REQUIRE(parsed.ok());
  CHECK(parsed.value->ordering.size() == 3);
}

TEST_CASE("by_answer_text style agrees across evaluators") {
  MockScript script = MockScript::from_json(json{
      {"seed", 9},
      {"rules", json::array({json{
           {"match", json{{"phase", 3}}},
           {"respond", json{{"generate", "evaluation"},
                            {"order", "by_answer_text"}}}}})}});
  MockBackend backend(mock_cfg(), script);
  DomainSpec domain = math_domain();
  QuestionArtifact q;
  q.statement = "q";
  q.reference_answer = "r";
  // two evaluators see the same answers under swapped labels
  auto p1 = render_evaluation_prompt(domain, q, {{"A", "avocado"}, {"B", "zebra"}});
  auto p2 = render_evaluation_prompt(domain, q, {{"A", "zebra"}, {"B", "avocado"}});
  auto r1 = parse_evaluation(domain, backend.complete(p1, {}, ctx_for(3, "e1")).text,
                             {"A", "B"});
  auto r2 = parse_evaluation(domain, backend.complete(p2, {}, ctx_for(3, "e2")).text,
                             {"A", "B"});
  REQUIRE(r1.ok());
  REQUIRE(r2.ok());
  CHECK(r1.value->ordering == std::vector<std::string>{"A", "B"});  // avocado first
  CHECK(r2.value->ordering == std::vector<std::string>{"B", "A"});  // still avocado
}

TEST_CASE("mock responses are pure functions of the call context") {
  MockBackend backend(mock_cfg(), MockScript::auto_script(77));
  auto a = backend.complete("p", {}, ctx_for(2, "m3"));
  auto b = backend.complete("p", {}, ctx_for(2, "m3"));
  CHECK(a.text == b.text);
  auto other = backend.complete("p", {}, ctx_for(2, "m4"));
  CHECK(a.text != other.text);
}

TEST_CASE("complete_with_retries: two failures then success") {
  MockScript script = MockScript::from_json(json{
      {"rules", json::array(
                    {json{{"match", json{{"transport_attempt", 1}}},
                          {"fail", json{{"kind", "empty"}}}},
                     json{{"match", json{{"transport_attempt", 2}}},
                          {"fail", json{{"kind", "timeout"}}}},
                     json{{"respond", json{{"text", "finally"}}}}})}});
  MockBackend backend(mock_cfg(), script);
  std::mt19937_64 rng(1);
  int sleeps = 0;
  auto outcome = complete_with_retries(
      backend, "p", {}, ctx_for(2, "m1"), fast_policy(), rng,
      [&](double) { ++sleeps; });
  CHECK(outcome.ok);
  CHECK(outcome.final.text == "finally");
  REQUIRE(outcome.attempts.size() == 3);
  CHECK_FALSE(outcome.attempts[0].result.ok);
  CHECK_FALSE(outcome.attempts[1].result.ok);
  CHECK(outcome.attempts[2].result.ok);
  CHECK(sleeps == 2);
}

TEST_CASE("complete_with_retries: fatal provider error stops immediately") {
  MockScript script = MockScript::from_json(json{
      {"rules", json::array({json{
           {"fail", json{{"kind", "http"}, {"http_status", 401}}}}})}});
  MockBackend backend(mock_cfg(), script);
  std::mt19937_64 rng(1);
  auto outcome =
      complete_with_retries(backend, "p", {}, ctx_for(2, "m1"), fast_policy(), rng,
                            [](double) {});
  CHECK_FALSE(outcome.ok);
  CHECK_FALSE(outcome.exhausted);  // fatal, not exhausted
  CHECK(outcome.attempts.size() == 1);
  CHECK(outcome.final.http_status == 401);
}

TEST_CASE("complete_with_retries: three timeouts exhaust the budget") {
  MockScript script = MockScript::from_json(
      json{{"rules", json::array({json{{"fail", json{{"kind", "timeout"}}}}})}});
  MockBackend backend(mock_cfg(), script);
  std::mt19937_64 rng(1);
  auto outcome =
      complete_with_retries(backend, "p", {}, ctx_for(2, "m1"), fast_policy(), rng,
                            [](double) {});
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.exhausted);
  CHECK(outcome.attempts.size() == 3);
}

TEST_CASE("empty 200 body is treated as retryable even from a literal rule") {
  MockScript script = MockScript::from_json(json{
      {"rules", json::array(
                    {json{{"match", json{{"transport_attempt", 1}}},
                          {"respond", json{{"text", "   "}}}},
                     json{{"respond", json{{"text", "real content"}}}}})}});
  MockBackend backend(mock_cfg(), script);
  std::mt19937_64 rng(1);
  auto outcome =
      complete_with_retries(backend, "p", {}, ctx_for(2, "m1"), fast_policy(), rng,
                            [](double) {});
  CHECK(outcome.ok);
  CHECK(outcome.attempts.size() == 2);
  CHECK(outcome.attempts[0].result.error == CallErrorKind::Empty);
}

TEST_CASE("backoff: full jitter within the growing ceiling, deterministic") {
  RetryPolicy policy;
  policy.base_delay_s = 2.0;
  policy.max_delay_s = 60.0;
  std::mt19937_64 rng(42);
  std::vector<double> first;
  for (int attempt = 2; attempt <= 8; ++attempt) {
    double ceiling = std::min(policy.max_delay_s, policy.base_delay_s *
                                                      std::pow(2.0, attempt - 2)) *
                     1000.0;
    double d = backoff_with_jitter(policy, attempt, rng);
    CHECK(d >= 0.0);
    CHECK(d <= ceiling);
    first.push_back(d);
  }
  std::mt19937_64 rng2(42);
  for (int attempt = 2; attempt <= 8; ++attempt)
    CHECK(backoff_with_jitter(policy, attempt, rng2) == first[size_t(attempt - 2)]);
}
