#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "crowdeval/types.hpp"

namespace crowdeval {

struct BackendConfig {
  std::string backend_id;
  std::string kind;          // "live" | "mock"
  std::string endpoint_url;  // live: base url; POST {url}/chat/completions
  std::string model_name;    // provider-side identifier
  std::string api_key_env;   // env var holding the bearer token
  double timeout_s = 120.0;
  int max_tokens = 4096;
  std::string mock_script_path;      // mock: script file
  std::optional<json> mock_script;   // mock: inline script (takes precedence)
  int max_in_flight = 4;             // per-backend concurrency cap
};

struct SamplingParams {
  double temperature = 1.0;
  int max_tokens = 4096;
};

/// Who is calling and why. Backends may use it (mock scripts match on it);
/// it also keys the deterministic seeds for jitter and mock content.
struct CallContext {
  int run_index = 0;
  int round_index = 0;
  int phase = 0;             // 1..4
  std::string actor;         // model_id
  std::string role;          // "questioner" | "answerer" | "evaluator" | "probe"
  int prompt_attempt = 1;    // validation re-prompt counter (1-based)
  int transport_attempt = 1; // retry counter within one prompt (1-based)
};

enum class CallErrorKind { None, Timeout, Transport, Provider, Empty, Config };

inline const char* call_error_kind_name(CallErrorKind k) {
  switch (k) {
    case CallErrorKind::None: return "none";
    case CallErrorKind::Timeout: return "timeout";
    case CallErrorKind::Transport: return "transport";
    case CallErrorKind::Provider: return "provider";
    case CallErrorKind::Empty: return "empty";
    case CallErrorKind::Config: return "config";
  }
  return "unknown";
}

struct CompletionResult {
  bool ok = false;
  std::string text;
  double latency_ms = 0.0;
  std::optional<json> token_usage;  // only when the provider reports it
  int http_status = 0;              // 0 when not an HTTP-level outcome
  CallErrorKind error = CallErrorKind::None;
  std::string error_detail;

  /// Timeouts, transport errors, HTTP 408/429/5xx and empty content are
  /// retryable; other 4xx and configuration faults are fatal.
  bool retryable() const {
    switch (error) {
      case CallErrorKind::None: return false;
      case CallErrorKind::Timeout:
      case CallErrorKind::Transport:
      case CallErrorKind::Empty: return true;
      case CallErrorKind::Config: return false;
      case CallErrorKind::Provider:
        return http_status == 408 || http_status == 429 ||
               (http_status >= 500 && http_status < 600);
    }
    return false;
  }
};

/// Uniform completion interface over live endpoints and scripted mocks.
/// Implementations are shareable handles; complete() may be called
/// concurrently and enforces the per-backend in-flight cap internally.
class Backend {
 public:
  explicit Backend(BackendConfig config) : config_(std::move(config)) {}
  virtual ~Backend() = default;

  virtual CompletionResult complete(const std::string& prompt,
                                    const SamplingParams& params,
                                    const CallContext& ctx) = 0;

  /// Cheap reachability check used by the startup probe. Mocks are always
  /// reachable.
  virtual void probe() {}

  virtual bool is_mock() const = 0;
  const BackendConfig& config() const { return config_; }

 protected:
  // Simple counting gate; std::counting_semaphore has no runtime max.
  class InFlightGate {
   public:
    explicit InFlightGate(int limit) : limit_(limit < 1 ? 1 : limit) {}
    void acquire() {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return in_flight_ < limit_; });
      ++in_flight_;
    }
    void release() {
      {
        std::lock_guard lock(mutex_);
        --in_flight_;
      }
      cv_.notify_one();
    }

   private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
  };

  struct GateGuard {
    InFlightGate& gate;
    explicit GateGuard(InFlightGate& g) : gate(g) { gate.acquire(); }
    ~GateGuard() { gate.release(); }
  };

  BackendConfig config_;
};

}  // namespace crowdeval
