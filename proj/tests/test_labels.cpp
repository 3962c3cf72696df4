#include <doctest.h>

#include "fixtures.hpp"
#include "shad/labels.hpp"

using namespace shad;
using shad::testing::toy;

TEST_SUITE("labels") {
  TEST_CASE("label source names") {
    CHECK(parse_label_source("shad") == LabelSource::Shad);
    CHECK(parse_label_source("regex") == LabelSource::Regex);
    CHECK(parse_label_source("truth") == LabelSource::GroundTruth);
    CHECK(to_string(LabelSource::Regex) == "regex");
    CHECK_THROWS_AS(parse_label_source("oracle"), std::invalid_argument);
  }

  TEST_CASE("truth labels follow the generator spans") {
    auto ex = labelled_examples(toy().corpus.samples, toy().vocab, 256, {LabelSource::GroundTruth});
    REQUIRE(ex.size() == toy().corpus.size());
    for (std::size_t k = 0; k < ex[0].labels.size(); ++k) CHECK(ex[0].labels[k] == coarse(ex[0].truth[k]));
  }

  TEST_CASE("regex labels mark field names as boilerplate") {
    Labeling regex{LabelSource::Regex, nullptr, &Ruleset::agent_format()};
    auto ex = labelled_examples(toy().corpus.samples, toy().vocab, 256, regex);
    CHECK(ex[0].labels.front() == CoarseRole::Boilerplate);
    std::size_t reasoning = 0, truth_reasoning = 0;
    for (const auto& e : ex)
      for (std::size_t k = 0; k < e.labels.size(); ++k) {
        reasoning += e.labels[k] == CoarseRole::Reasoning;
        truth_reasoning += e.truth[k] == RoleKind::Reasoning;
      }
    CHECK(reasoning > truth_reasoning);
  }

  TEST_CASE("shad labels come from the annotation") {
    auto ann = annotate_corpus(toy().base, toy().base, toy().corpus, toy().vocab, {});
    Labeling shad_labels{LabelSource::Shad, &ann};
    auto ex = labelled_examples(toy().corpus.samples, toy().vocab, 256, shad_labels);
    for (const auto& e : ex)
      for (auto l : e.labels) CHECK(l == CoarseRole::Boilerplate);
  }

  TEST_CASE("missing label inputs are errors naming the sample") {
    CHECK_THROWS_AS(labelled_examples(toy().corpus.samples, toy().vocab, 256, {LabelSource::Shad}), LabelError);
    CHECK_THROWS_AS(labelled_examples(toy().corpus.samples, toy().vocab, 256, {LabelSource::Regex}), LabelError);
    AnnotatedCorpus empty;
    Labeling shad_labels{LabelSource::Shad, &empty};
    CHECK_THROWS_WITH_AS(labelled_examples(toy().corpus.samples, toy().vocab, 256, shad_labels),
                         doctest::Contains(toy().corpus.samples[0].id.c_str()), LabelError);
    auto unlabeled = toy().corpus.samples;
    unlabeled[0].role_spans.reset();
    CHECK_THROWS_WITH_AS(labelled_examples(unlabeled, toy().vocab, 256, {LabelSource::GroundTruth}),
                         doctest::Contains(unlabeled[0].id.c_str()), LabelError);
  }

  TEST_CASE("held-out evaluation splits ground-truth groups") {
    auto e = evaluate_truth(toy().base, toy().corpus.samples, toy().vocab, 256);
    CHECK(e.n_all == e.n_boilerplate + e.n_reasoning);
    CHECK(e.n_reasoning > 0);
    CHECK(e.all == doctest::Approx((e.boilerplate * e.n_boilerplate + e.reasoning * e.n_reasoning) / e.n_all));
  }
}
