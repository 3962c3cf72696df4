#include <doctest.h>

#include <cstdlib>

#include "shad/config.hpp"

using namespace shad;

TEST_SUITE("config") {
  TEST_CASE("defaults round-trip through JSON") {
    RunConfig c;
    CHECK(RunConfig::from_json(c.to_json()) == c);
    c.seeds.corpus = 9;
    c.sweep.inv_taus = {0.0, 3.0};
    c.train.max_steps = 77;
    CHECK(RunConfig::from_json(c.to_json()) == c);
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
  }

  TEST_CASE("partial files keep defaults") {
    auto c = RunConfig::from_json(R"({"generator": {"n_samples": 50}, "scheme": {"name": "sft"}})");
    CHECK(c.generator.n_samples == 50);
    CHECK(c.scheme.name == "sft");
    CHECK(c.model.width == 64);
    CHECK(c.tune.batch_size == 1);
  }

  TEST_CASE("errors name the offending key") {
    CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"model": {"widht": 3}})"), doctest::Contains("model.widht"),
                         RunConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"seeds": {"corpus": "one"}})"), doctest::Contains("seeds.corpus"),
                         RunConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"scheme": {"name": "dpo"}})"), doctest::Contains("scheme.name"),
                         RunConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"train": {"learning_rate": -1}})"),
                         doctest::Contains("learning_rate"), RunConfigError);
    CHECK_THROWS_AS(RunConfig::from_json("{"), RunConfigError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.json"), RunConfigError);
  }

  TEST_CASE("environment overrides the workdir") {
    RunConfig c;
    c.paths.workdir = "from-config";
    ::unsetenv("SHAD_WORKDIR");
    CHECK(c.workdir() == "from-config");
    ::setenv("SHAD_WORKDIR", "/tmp/elsewhere", 1);
    CHECK(c.workdir() == "/tmp/elsewhere");
    ::unsetenv("SHAD_WORKDIR");
  }

  TEST_CASE("optimizer blocks map to training configs") {
    RunConfig c;
    auto t = c.train_config(c.tune, 5);
    CHECK(t.batch_size == 1);
    CHECK(t.epochs == 3);
    CHECK(t.learning_rate == 3e-4);
    CHECK(t.seed == 5);
    CHECK(t.max_sequence_length == 256);
  }
}
