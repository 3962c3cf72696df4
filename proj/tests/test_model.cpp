#include <doctest.h>

#include <cmath>

#include "shad/gradcheck.hpp"
#include "shad/model.hpp"

using namespace shad;

namespace {

Tokenization toy_tokens(int vocab, int length, std::uint64_t seed) {
  Rng rng(seed);
  Tokenization tok;
  for (int i = 0; i < length; ++i) {
    tok.ids.push_back(static_cast<TokenId>(Vocab::kNumSpecials + rng.below(static_cast<std::uint64_t>(vocab) - Vocab::kNumSpecials)));
    tok.char_spans.push_back({0, 0});
  }
  tok.boundary = static_cast<std::size_t>(length / 3);
  return tok;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("uniform logits give ln V for every token") {
    ModelDims dims{23, 16, 1, 2, 32};
    auto params = ModelParams<double>::zeros(dims);
    for (double l : token_losses(params, toy_tokens(23, 12, 1))) CHECK(l == doctest::Approx(std::log(23.0)).epsilon(1e-14));
  }

  TEST_CASE("a dominant correct logit drives the loss to zero") {
    ModelDims dims{8, 16, 1, 2, 32};
    auto params = ModelParams<double>::zeros(dims);
    Tokenization tok;
    tok.ids = {5, Vocab::kSep, 6, 6};
    tok.char_spans.assign(4, {0, 0});
    tok.boundary = 2;
    params.vec(TensorKind::UnembedBias)(6) = 60.0;
    for (double l : token_losses(params, tok)) CHECK(l < 1e-25);
  }

  TEST_CASE("hand-set logits match an arbitrary-precision softmax") {
    // Zero layer-norm gains leave logits equal to the unembedding bias.
    ModelDims dims{8, 16, 1, 2, 32};
    auto params = ModelParams<double>::zeros(dims);
    params.vec(TensorKind::UnembedBias) << -1.0, 0.5, 0.25, 2.0, -0.5, 1.5, -2.25, 0.75;
    Tokenization tok;
    tok.ids = {5, Vocab::kSep, 6, 7, 5};
    tok.char_spans.assign(5, {0, 0});
    tok.boundary = 2;
    auto losses = token_losses(params, tok);
    REQUIRE(losses.size() == 3);
    CHECK(losses[0] == doctest::Approx(5.140388491018120750).epsilon(1e-14));
    CHECK(losses[1] == doctest::Approx(2.140388491018120750).epsilon(1e-14));
    CHECK(losses[2] == doctest::Approx(1.390388491018120750).epsilon(1e-14));
  }

  TEST_CASE("initialization is deterministic and scaled") {
    ModelDims dims{50, 64, 2, 2, 64};
    auto a = ModelParams<float>::initialize(dims, 3);
    CHECK(a.values == ModelParams<float>::initialize(dims, 3).values);
    CHECK(a.values != ModelParams<float>::initialize(dims, 4).values);
    CHECK(a.vec(TensorKind::FinalGain).minCoeff() == 1.0f);
    CHECK(a.vec(TensorKind::UnembedBias).cwiseAbs().maxCoeff() == 0.0f);
    const auto emb = a.tensor(TensorKind::TokenEmbedding);
    const double emb_std = std::sqrt(emb.cast<double>().array().square().mean());
    CHECK(emb_std == doctest::Approx(0.02).epsilon(0.1));
    const auto w = a.tensor(TensorKind::FfnOutWeight, 1);
    const double w_std = std::sqrt(w.cast<double>().array().square().mean());
    CHECK(w_std == doctest::Approx(1.0 / std::sqrt(256.0) / 2.0).epsilon(0.1));
  }

  TEST_CASE("tensor table is contiguous") {
    ModelDims dims{30, 16, 2, 2, 16};
    Eigen::Index offset = 0;
    for (const auto& t : tensor_table(dims)) {
      CHECK(t.offset == offset);
      offset += t.rows * t.cols;
    }
    CHECK(offset == parameter_count(dims));
    CHECK_THROWS_AS(ModelDims({30, 15, 1, 2, 16}).validate(), std::invalid_argument);
  }

  TEST_CASE("sequences beyond the context are rejected") {
    ModelDims dims{20, 16, 1, 2, 8};
    auto params = ModelParams<double>::initialize(dims, 1);
    CHECK_THROWS_AS(token_losses(params, toy_tokens(20, 9, 1)), ContextOverflow);
  }

  TEST_CASE("gradient check at small and default widths") {
    for (int d : {16, 64})
      for (int layers : {1, 2}) {
        ModelDims dims{40, d, layers, 2, 48};
        auto params = ModelParams<double>::initialize(dims, 11);
        const double err = grad_check(params, toy_tokens(40, 30, 5), 32, 1e-5, 7);
        CAPTURE(d);
        CAPTURE(layers);
        CHECK(err < 1e-5);
      }
  }

  TEST_CASE("a zeroed gradient entry is detected") {
    ModelDims dims{40, 16, 1, 2, 48};
    auto params = ModelParams<double>::initialize(dims, 11);
    auto tok = toy_tokens(40, 30, 5);
    const auto honest = grad_check_detailed(params, tok, 40, 1e-5, 3);
    REQUIRE(!honest.probes.empty());
    const Eigen::Index target = honest.probes.front().index;
    GradientFn broken = [target](const ModelParams<double>& p, const Tokenization& tk) {
      ColVec<double> g = summed_loss_gradient(p, tk);
      g(target) = 0.0;
      return g;
    };
    const auto result = grad_check_detailed(params, tok, 40, 1e-5, 3, broken);
    CHECK(result.probes.front().relative_error == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(result.max_relative_error == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("zero probes returns zero") {
    ModelDims dims{40, 16, 1, 2, 48};
    auto params = ModelParams<double>::initialize(dims, 1);
    CHECK(grad_check(params, toy_tokens(40, 10, 1), 0, 1e-5) == 0.0);
  }

  TEST_CASE("float and double forward passes agree") {
    ModelDims dims{40, 32, 2, 2, 48};
    auto p = ModelParams<double>::initialize(dims, 2);
    auto tok = toy_tokens(40, 40, 3);
    auto ld = token_losses(p, tok);
    auto lf = token_losses(p.cast<float>(), tok);
    for (std::size_t k = 0; k < ld.size(); ++k) CHECK(lf[k] == doctest::Approx(ld[k]).epsilon(1e-4));
  }

  TEST_CASE("predicted distributions sum to one") {
    ModelDims dims{40, 32, 2, 2, 48};
    auto p = ModelParams<float>::initialize(dims, 6);
    ForwardCache<float> cache;
    forward(p, toy_tokens(40, 40, 2), cache);
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
      const auto row = cache.probs.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(cache.probs.rows()))));
      CHECK(std::abs(row.cast<double>().sum() - 1.0) < 1e-6);
      CHECK(row.minCoeff() >= 0.0f);
    }
  }
}
