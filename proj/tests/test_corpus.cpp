#include <doctest.h>

#include <algorithm>
#include <set>

#include "shad/corpus.hpp"
#include "shad/generator.hpp"

using namespace shad;

namespace {

Corpus small_corpus(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i)
    c.samples.push_back({"s" + std::to_string(i), "in " + std::to_string(i), "out " + std::to_string(i), std::nullopt});
  return c;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("generator produces the requested count with sequential ids") {
    auto corpus = generate_corpus(react_generator_config(100, 7));
    REQUIRE(corpus.size() == 100);
    CHECK(corpus.samples.front().id == "syn-0000");
    CHECK(corpus.samples.back().id == "syn-0099");
    CHECK_NOTHROW(validate_corpus(corpus));
    CHECK(std::holds_alternative<SyntheticProvenance>(corpus.provenance));
  }

  TEST_CASE("generator output is deterministic") {
    CHECK(to_jsonl(generate_corpus(react_generator_config(50, 11))) ==
          to_jsonl(generate_corpus(react_generator_config(50, 11))));
    CHECK(to_jsonl(generate_corpus(react_generator_config(50, 11))) !=
          to_jsonl(generate_corpus(react_generator_config(50, 12))));
  }

  TEST_CASE("query-specific phrases land in reasoning spans") {
    auto corpus = generate_corpus(react_generator_config(2000, 7));
    std::size_t checked = 0;
    for (const auto& s : corpus.samples) {
      if (s.input.find("smart phones") == std::string::npos) continue;
      bool in_reasoning = false;
      for (const auto& span : *s.role_spans)
        if (span.kind == RoleKind::Reasoning &&
            s.output.substr(span.start, span.end - span.start).find("smart phones") != std::string::npos)
          in_reasoning = true;
      CHECK_MESSAGE(in_reasoning, s.id);
      ++checked;
    }
    CHECK(checked > 0);
  }

  TEST_CASE("every role kind occurs and spans tile each output") {
    auto corpus = generate_corpus(react_generator_config(300, 5));
    std::set<RoleKind> kinds;
    for (const auto& s : corpus.samples) {
      REQUIRE(s.role_spans);
      for (const auto& span : *s.role_spans) kinds.insert(span.kind);
    }
    CHECK(kinds.size() == 4);
    CHECK_NOTHROW(validate_corpus(generate_corpus(pretrain_generator_config(200, 5))));
  }

  TEST_CASE("generator config validation names the missing slot") {
    auto config = react_generator_config(10, 1);
    config.template_set = {"<F>Thought: <R>${nonexistent_slot}"};
    CHECK(error_of([&] { validate(config); }).find("nonexistent_slot") != std::string::npos);
  }

  TEST_CASE("JSONL round-trip is lossless") {
    auto corpus = generate_corpus(react_generator_config(40, 3));
    auto parsed = parse_jsonl(to_jsonl(corpus));
    CHECK(parsed.samples == corpus.samples);
    CHECK(to_jsonl(parsed) == to_jsonl(corpus));
  }

  TEST_CASE("three well-formed lines parse in order") {
    auto c = parse_jsonl(
        "{\"id\":\"a\",\"input\":\"x\",\"output\":\"y\"}\n"
        "{\"id\":\"b\",\"input\":\"x\",\"output\":\"y\"}\n"
        "{\"id\":\"c\",\"input\":\"x\",\"output\":\"y\"}\n");
    REQUIRE(c.size() == 3);
    CHECK(c.samples[0].id == "a");
    CHECK(c.samples[2].id == "c");
    CHECK_FALSE(c.samples[1].role_spans.has_value());
  }

  TEST_CASE("JSONL errors") {
    CHECK(error_of([] {
            parse_jsonl("{\"id\":\"a\",\"input\":\"x\",\"output\":\"y\"}\n{\"id\":\"b\",\"input\":\"x\"}\n");
          }).find("line 2: missing field output") != std::string::npos);
    CHECK(error_of([] {
            parse_jsonl("{\"id\":\"a\",\"input\":\"x\",\"output\":\"y\"}\n{\"id\":\"a\",\"input\":\"x\",\"output\":\"y\"}\n");
          }).find("duplicate id a") != std::string::npos);
    const auto uncovered = error_of([] {
      parse_jsonl("{\"id\":\"gap-7\",\"input\":\"x\",\"output\":\"hello\",\"role_spans\":[[0,3,\"Format\"]]}\n");
    });
    CHECK(uncovered.find("gap-7") != std::string::npos);
    CHECK(error_of([] { parse_jsonl("not json\n"); }).find("line 1") != std::string::npos);
  }

  TEST_CASE("role_at follows the spans") {
    Sample s{"x", "q", "abcdef", std::vector<RoleSpan>{{0, 2, RoleKind::Format}, {2, 6, RoleKind::Reasoning}}};
    CHECK(role_at(s, 1) == RoleKind::Format);
    CHECK(role_at(s, 2) == RoleKind::Reasoning);
    CHECK_FALSE(role_at(s, 6).has_value());
  }

  TEST_CASE("shuffle sizes and the two-sample derangement") {
    CHECK(shuffle_outputs(small_corpus(10000), 0.01, 1).samples.size() == 100);
    auto two = shuffle_outputs(small_corpus(2), 1.0, 9);
    CHECK(two.permutation == std::vector<std::size_t>{1, 0});
    CHECK_THROWS_AS(shuffle_outputs(small_corpus(60), 0.01, 1), CorpusError);
    CHECK_THROWS_AS(shuffle_outputs(small_corpus(10), 0.0, 1), CorpusError);
  }

  TEST_CASE("shuffle is a derangement preserving the output multiset") {
    auto corpus = small_corpus(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto sh = shuffle_outputs(corpus, 1.0, seed);
      std::vector<std::string> before, after;
      for (std::size_t i = 0; i < sh.samples.size(); ++i) {
        CHECK(sh.permutation[i] != i);
        const auto& base = corpus.samples[corpus.find(sh.base_ids[i])];
        CHECK(sh.samples[i].input == base.input);
        CHECK(sh.samples[i].output != base.output);
        before.push_back(base.output);
        after.push_back(sh.samples[i].output);
      }
      std::sort(before.begin(), before.end());
      std::sort(after.begin(), after.end());
      CHECK(before == after);
    }
  }

  TEST_CASE("shuffled corpus JSONL round-trip") {
    auto sh = shuffle_outputs(small_corpus(30), 0.5, 4);
    auto dir = std::filesystem::temp_directory_path() / "shad_test_shuffle";
    std::filesystem::create_directories(dir);
    save_jsonl(sh, dir / "s.jsonl");
    auto back = load_shuffled_jsonl(dir / "s.jsonl");
    CHECK(back.samples == sh.samples);
    CHECK(back.permutation == sh.permutation);
    CHECK(back.base_ids == sh.base_ids);
    std::filesystem::remove_all(dir);
  }
}
