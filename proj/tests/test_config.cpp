#include <doctest.h>

#include "hartlab/config.hpp"

using namespace hartlab;
using config::ConfigError;
using config::RunConfig;

namespace {

constexpr const char* kSample = R"(
# reference experiment
[env]
grid = 4
answers = 4
cue_noise = 0.2
leak_prob = 0.0
mode = "hart"
seed = 7

[optim]
group_size = 8
beta = 0.01   # held fixed across compared methods
k = 0.6
lr = 0.05
steps = 2000

[sft]
examples = 512
lr = 0.5
steps = 1500

[run]
method = "apgrpo"
stages = "rl,sft"
eval_episodes = 20000
output_dir = "out"
threads = 2
)";

}  // namespace

TEST_CASE("parse_config_text: full sample") {
  const RunConfig cfg = config::parse_config_text(kSample, "sample");
  CHECK(cfg.env.grid_g == 4);
  CHECK(cfg.env.cue_noise == 0.2);
  CHECK(cfg.env.mode == env::Mode::Hart);
  CHECK(cfg.env.seed == 7);
  CHECK(cfg.optim.beta == 0.01);
  CHECK(cfg.optim.k == 0.6);
  CHECK(cfg.optim.steps == 2000);
  CHECK(cfg.sft.n_examples == 512);
  CHECK(cfg.method == trainer::Method::Apgrpo);
  REQUIRE(cfg.stages.size() == 2);
  CHECK(cfg.stages[0] == config::Stage::Rl);
  CHECK(cfg.stages[1] == config::Stage::Sft);
  CHECK(cfg.eval_episodes == 20000);
  CHECK(cfg.threads == 2);
  // defaults fill everything not mentioned
  CHECK(cfg.optim.clip_ratio == 0.0);
  CHECK(cfg.ranges.sft_base == (std::uint64_t{1} << 32));
}

TEST_CASE("parse_config_text: unknown keys and sections are errors") {
  CHECK_THROWS_WITH_AS(config::parse_config_text("[env]\ngrid_x = 4\n", "t"),
                       "t:2: unknown key env.grid_x", ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("[nope]\nx = 1\n", "t"), ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("grid = 4\n", "t"), ConfigError);
}

TEST_CASE("parse_config_text: type and value errors carry the field name") {
  CHECK_THROWS_WITH_AS(config::parse_config_text("[env]\ngrid = four\n", "t"),
                       "t:2: env.grid: expected an integer, got \"four\"", ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("[env]\nmode = \"foo\"\n", "t"), ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("[env]\ncue_noise = 2.0\n", "t"), ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("[run]\nstages = \"rl,nope\"\n", "t"), ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("[optim]\nk = 1.5\n", "t"), ConfigError);
}

TEST_CASE("canonical_text and config_hash are stable") {
  const RunConfig a = config::parse_config_text(kSample, "a");
  const RunConfig b = config::parse_config_text(kSample, "b");
  CHECK(config::canonical_text(a) == config::canonical_text(b));
  CHECK(config::config_hash(a) == config::config_hash(b));

  RunConfig c = a;
  c.env.seed = 8;
  CHECK(config::config_hash(c) != config::config_hash(a));

  // canonical text parses back to the same canonical text
  const RunConfig reparsed = config::parse_config_text(config::canonical_text(a), "c");
  CHECK(config::canonical_text(reparsed) == config::canonical_text(a));
}

TEST_CASE("defaults validate") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.stages.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
