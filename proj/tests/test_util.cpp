#include <catch2/catch_amalgamated.hpp>

#include "crowdeval/util.hpp"

using namespace crowdeval;

TEST_CASE("named section parsing") {
  std::string text =
      "preamble to ignore\n"
      "== PROBLEM STATEMENT ==\n"
      "Find all x.\nSecond line.\n"
      "==  reference solution ==\n"
      "x = 4\n";
  auto sections = parse_named_sections(text);
  REQUIRE(sections.size() == 2);
  CHECK(sections[0].first == "PROBLEM STATEMENT");
  CHECK(sections[0].second == "Find all x.\nSecond line.");
  CHECK(sections[1].first == "REFERENCE SOLUTION");
  CHECK(sections[1].second == "x = 4");
}

TEST_CASE("named section parsing ignores non-fence lines with ==") {
  auto sections = parse_named_sections("a == b\n== S ==\nx == y\n");
  REQUIRE(sections.size() == 1);
  CHECK(sections[0].second == "x == y");
}

TEST_CASE("code fence extraction") {
  std::string text =
      "before\n```json\n{\"a\": 1}\n```\nmiddle\n```\nplain\n```\n";
  auto blocks = extract_code_fences(text);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0] == "{\"a\": 1}\n");
  CHECK(blocks[1] == "plain\n");
}

TEST_CASE("unterminated fence yields no block") {
  CHECK(extract_code_fences("```json\n{\"a\": 1}\n").empty());
}

TEST_CASE("deterministic shuffle is stable across runs") {
  std::vector<int> v{1, 2, 3, 4, 5, 6};
  std::mt19937_64 rng(42);
  deterministic_shuffle(v, rng);
  std::vector<int> first = v;

  std::vector<int> w{1, 2, 3, 4, 5, 6};
  std::mt19937_64 rng2(42);
  deterministic_shuffle(w, rng2);
  CHECK(w == first);

  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("seed derivation distinguishes all parts") {
  auto a = derive_seed(1, {"labels", "m1"}, {0, 0});
  CHECK(a == derive_seed(1, {"labels", "m1"}, {0, 0}));
  CHECK(a != derive_seed(2, {"labels", "m1"}, {0, 0}));
  CHECK(a != derive_seed(1, {"labels", "m2"}, {0, 0}));
  CHECK(a != derive_seed(1, {"labels", "m1"}, {1, 0}));
  CHECK(a != derive_seed(1, {"jitter", "m1"}, {0, 0}));
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 100.0, 2.0 / 3.0, 74.85, 1e-9}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("hex64 is fixed width") {
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
}

TEST_CASE("answer labels") {
  CHECK(answer_label(0) == "A");
  CHECK(answer_label(25) == "Z");
}
