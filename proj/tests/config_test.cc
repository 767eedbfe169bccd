#include <doctest.h>

#include <sstream>
#include <string>

#include "grounding/config.h"
#include "grounding/errors.h"

using namespace grounding;

namespace {

RunConfig Load(const std::string &text) {
  std::istringstream in(text);
  return LoadConfig(in);
}

}  // namespace

TEST_CASE("presets") {
  const RunConfig desk = DeskPreset();
  CHECK(desk.train.adam.learning_rate == 1e-3);
  CHECK(desk.train.adam.beta1 == 0.9);
  CHECK(desk.train.adam.beta2 == 0.999);
  CHECK(desk.train.adam.epsilon == 1e-8);
  CHECK(desk.train.mode == AggregationMode::kHard);
  CHECK(desk.train.tau == 0.1);
  CHECK(desk.train.epochs == 3);
  CHECK(desk.train.batch_size == 1);
  CHECK(desk.weights.alpha == 2.0);
  CHECK(desk.weights.beta == 1.0);
  CHECK(desk.weights.gamma == 1.0);
  const RunConfig paper = PaperPreset();
  CHECK(paper.train.adam.learning_rate == 1.3e-5);
  CHECK(paper.train.iterations == 150000);
  CHECK_THROWS_AS(PresetByName("laptop"), ConfigError);
}

TEST_CASE("files override the preset") {
  const RunConfig c = Load(
      "# comment\n"
      "[model]\n"
      "d_v = 8\n"
      "d_l = 4\n"
      "[train]\n"
      "mode = soft\n"
      "tau = 0.5\n"
      "lr = 0.01\n"
      "loss_target = false\n"
      "alpha = 3\n"
      "preset = paper\n");
  CHECK(c.train.arch.visual_dim == 8);
  CHECK(c.train.arch.embedding_dim == 4);
  CHECK(c.train.mode == AggregationMode::kSoft);
  CHECK(c.train.tau == 0.5);
  CHECK(c.train.adam.learning_rate == 0.01);
  CHECK(c.train.iterations == 150000);
  CHECK_FALSE(c.train.unit_loss[0]);
  CHECK(c.weights.alpha == 3.0);
}

TEST_CASE("bad configurations") {
  CHECK_THROWS_AS(Load("d_v = 8\nwhatever = 1\n"), ConfigError);
  CHECK_THROWS_AS(Load("mode = lukewarm\n"), ConfigError);
  CHECK_THROWS_AS(Load("tau = 0\n"), ConfigError);
  CHECK_THROWS_AS(Load("d_l = -3\n"), ConfigError);
  CHECK_THROWS_AS(Load("lr = fast\n"), ConfigError);
  CHECK_THROWS_AS(Load("loss_target = false\nloss_reference = false\nloss_discriminative = false\n"),
                  ConfigError);
  try {
    Load("d_v = 8\nthis line is broken\n");
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("formatted configs load back unchanged") {
  RunConfig c = DeskPreset();
  c.train.tau = 0.03;
  c.train.gumbel = true;
  c.train.unit_loss[2] = false;
  c.weights.gamma = 0.25;
  const RunConfig back = Load(FormatConfig(c));
  CHECK(FormatConfig(back) == FormatConfig(c));
  CHECK(back.train.tau == 0.03);
  CHECK(back.train.gumbel);
}

TEST_CASE("missing config files") {
  CHECK_THROWS_AS(LoadConfigFile("/nonexistent/run.toml"), IoError);
}
