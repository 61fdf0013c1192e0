#include <doctest.h>

#include "cyclebench/run_config.hpp"
#include "temp_dir.hpp"

using namespace cyclebench;

TEST_CASE("defaults come from the schema") {
  RunConfig rc;
  for (const auto& k : config_schema()) CHECK(rc.text(k.name) == k.default_value);
  CHECK(rc.integer("seed") == 0);
  CHECK(rc.real("train.lr") == 1e-3);
  CHECK(rc.integer("model.encoder_dim") == 16);
  CHECK(rc.boolean("eval.svg"));
}

TEST_CASE("sections, comments and globals parse") {
  auto rc = RunConfig::from_text(
      "seed = 7   # global\n"
      "\n"
      "[train]\n"
      "lr = 2.5e-4\n"
      "epochs=3\n"
      "[model]\n"
      "  head = lstm\n"
      "causal = false\n");
  CHECK(rc.integer("seed") == 7);
  CHECK(rc.real("train.lr") == 2.5e-4);
  CHECK(rc.integer("train.epochs") == 3);
  CHECK(rc.text("model.head") == "lstm");
  CHECK_FALSE(rc.boolean("model.causal"));
}

TEST_CASE("to_text roundtrips") {
  RunConfig rc;
  rc.set("seed", "11");
  rc.set("data.preset", "drug");
  rc.set("eval.grid_step", "0.1");
  auto back = RunConfig::from_text(rc.to_text());
  for (const auto& k : config_schema()) CHECK(back.text(k.name) == rc.text(k.name));
}

TEST_CASE("errors carry the line number") {
  CHECK_THROWS_WITH_AS(RunConfig::from_text("[train]\nlearning_rate = 1\n", "f"),
                       doctest::Contains("f:2"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(RunConfig::from_text("[bogus]\n"), doctest::Contains("unknown section"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(RunConfig::from_text("[train]\nlr = 1\nlr = 2\n"), doctest::Contains("duplicate"),
                       std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_text("[train]\nepochs = ten\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_text("[eval]\nsvg = maybe\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_text("[train\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_text("justtext\n"), std::invalid_argument);
  RunConfig rc;
  CHECK_THROWS_AS(rc.set("train.nope", "1"), std::invalid_argument);
  CHECK_THROWS_AS(rc.text("nope"), std::invalid_argument);
  CHECK_THROWS(RunConfig::from_file("/nonexistent/config.txt"));
}

TEST_CASE("builders produce validated component configs") {
  RunConfig rc;
  rc.set("seed", "4");
  rc.set("model.head", "transformer");
  rc.set("model.causal", "true");
  rc.set("train.batch_size", "8");
  auto mc = model_config(rc, 16);
  CHECK(mc.head == HeadKind::transformer);
  CHECK(mc.causal);
  CHECK(mc.seed == 4);
  CHECK(mc.input_dim == 16);
  auto tc = train_config(rc);
  CHECK(tc.batch_size == 8);
  CHECK(tc.seed == 4);
  CHECK(split_fractions(rc) == std::array<double, 3>{0.8, 0.1, 0.1});
  CHECK(cycle_params(rc).condition == "regular");

  rc.set("train.lr", "-1");
  CHECK_THROWS_AS(train_config(rc), std::invalid_argument);
  rc.set("model.head", "gru");
  CHECK_THROWS(model_config(rc, 16));
}

TEST_CASE("config files load") {
  cyclebench::testing::TempDir tmp("rc");
  cyclebench::testing::spit(tmp / "run.cfg", "[data]\npreset = informative\nn_tracks = 12\n");
  auto rc = RunConfig::from_file(tmp / "run.cfg");
  CHECK(rc.text("data.preset") == "informative");
  CHECK(rc.integer("data.n_tracks") == 12);
}
