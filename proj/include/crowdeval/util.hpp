#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace crowdeval {

// ---------------------------------------------------------------------------
// Hashing. FNV-1a 64: stable across platforms, used for config digests and
// for deriving deterministic per-(run, round, actor) RNG seeds. Not
// cryptographic and not meant to be.
// ---------------------------------------------------------------------------

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t fnv1a64_mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (i * 8)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

/// Derive a child seed from a base seed plus any number of string/int parts.
/// Same inputs on any platform give the same seed.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::string_view> parts,
                                 std::initializer_list<std::uint64_t> nums = {}) {
  std::uint64_t h = fnv1a64_mix(kFnvOffset, base);
  for (auto p : parts) {
    h = fnv1a64(p, h);
    h *= kFnvPrime;
  }
  for (auto n : nums) h = fnv1a64_mix(h, n);
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic shuffle. std::shuffle's algorithm is implementation-defined,
// so logs produced on different standard libraries would diverge; this
// Fisher-Yates is fixed.
// ---------------------------------------------------------------------------

template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

/// Uniform integer in [0, bound) without std::uniform_int_distribution
/// (also implementation-defined). Modulo bias is irrelevant at our sizes.
inline std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
  return bound == 0 ? 0 : rng() % bound;
}

// ---------------------------------------------------------------------------
// String helpers.
// ---------------------------------------------------------------------------

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

inline bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

inline std::string replace_all(std::string s, std::string_view from,
                               std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

/// Shortest round-trip decimal for a double. Keeps CSV/JSON output
/// byte-stable for identical inputs.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Fenced blocks. Two kinds appear in prompts and responses:
//   == SECTION NAME ==        named section fences in generated questions
//   ```json ... ```           structured output blocks in evaluations
// ---------------------------------------------------------------------------

/// Parse `== NAME ==` delimited sections. Returns (canonical upper-case name,
/// body) pairs in order of appearance. Body excludes the fence lines.
inline std::vector<std::pair<std::string, std::string>> parse_named_sections(
    std::string_view text) {
  std::vector<std::pair<std::string, std::string>> sections;
  std::string* current = nullptr;
  for (auto& line : split_lines(text)) {
    std::string_view t = trim_view(line);
    if (t.size() >= 5 && t.substr(0, 2) == "==" && t.substr(t.size() - 2) == "==") {
      std::string name = trim(t.substr(2, t.size() - 4));
      if (!name.empty()) {
        sections.emplace_back(to_upper(name), std::string());
        current = &sections.back().second;
        continue;
      }
    }
    if (current) {
      current->append(line);
      current->push_back('\n');
    }
  }
  for (auto& [name, body] : sections) body = trim(body);
  return sections;
}

/// Extract all ``` fenced code blocks (language tag ignored), in order.
inline std::vector<std::string> extract_code_fences(std::string_view text) {
  std::vector<std::string> blocks;
  auto lines = split_lines(text);
  bool in_fence = false;
  std::string current;
  for (auto& line : lines) {
    std::string_view t = trim_view(line);
    if (t.substr(0, 3) == "```") {
      if (in_fence) {
        blocks.push_back(current);
        current.clear();
        in_fence = false;
      } else {
        in_fence = true;
      }
      continue;
    }
    if (in_fence) {
      current.append(line);
      current.push_back('\n');
    }
  }
  return blocks;
}

/// Answer labels are single letters A..Z in presentation order.
inline std::string answer_label(std::size_t index) {
  return std::string(1, static_cast<char>('A' + index));
}

}  // namespace crowdeval
