#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "crowdeval/crowdeval.hpp"

namespace testsupport {

using crowdeval::json;

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "crowdeval_test") {
    static std::atomic<unsigned> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / (tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const {
    return path_ / leaf;
  }

 private:
  std::filesystem::path path_;
};

/// n models m1..mn, each on its own mock backend b1..bn so tests can
/// script them independently. Retry delays are zeroed.
inline crowdeval::RunConfig mock_config(int n, std::uint64_t seed,
                                        const std::filesystem::path& out_dir,
                                        const std::string& domain = "math",
                                        int num_runs = 1) {
  crowdeval::RunConfig c;
  c.experiment = "test";
  c.domain_id = domain;
  c.num_runs = num_runs;
  c.seed = seed;
  c.output_dir = out_dir.string();
  c.retry.base_delay_s = 0.0;
  c.retry.max_delay_s = 0.0;
  for (int i = 1; i <= n; ++i) {
    std::string id = "m" + std::to_string(i);
    std::string backend = "b" + std::to_string(i);
    crowdeval::ModelSpec m;
    m.model_id = id;
    m.display_name = "Model " + std::to_string(i);
    m.backend_ref = backend;
    c.models.push_back(std::move(m));
    crowdeval::BackendConfig b;
    b.backend_id = backend;
    b.kind = "mock";
    b.mock_script = json{{"seed", seed}};
    c.backends[backend] = std::move(b);
  }
  return c;
}

/// Append a rule to one backend's inline mock script.
inline void add_mock_rule(crowdeval::RunConfig& config, const std::string& backend,
                          const json& rule) {
  json& script = *config.backends.at(backend).mock_script;
  if (!script.contains("rules")) script["rules"] = json::array();
  script["rules"].push_back(rule);
}

inline std::vector<json> read_log_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    lines.push_back(json::parse(line));
  }
  return lines;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline crowdeval::RunResult run_to_completion(crowdeval::RunConfig config,
                                              bool resume = false,
                                              crowdeval::Hooks hooks = {}) {
  crowdeval::Orchestrator orch(std::move(config), std::move(hooks));
  return orch.run(resume);
}

}  // namespace testsupport
