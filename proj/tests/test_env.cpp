#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hartlab/env.hpp"
#include "hartlab/rng.hpp"
#include "test_support.hpp"

using namespace hartlab;

TEST_CASE("env config validation") {
  env::EnvConfig cfg;
  cfg.grid_g = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = env::EnvConfig{};
  cfg.cue_noise = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = env::EnvConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("gen_instance: cue noise edge cases") {
  env::EnvConfig cfg = testsupport::reference_env();

  cfg.cue_noise = 0.0;
  auto gen0 = rng::Xoshiro256pp(1);
  for (int i = 0; i < 2000; ++i) {
    const auto inst = env::gen_instance(cfg, gen0);
    CHECK(inst.cue_cell == inst.evidence_cell);
    CHECK(inst.cell_contents[inst.evidence_cell] == inst.answer);
  }

  cfg.cue_noise = 1.0;
  auto gen1 = rng::Xoshiro256pp(2);
  for (int i = 0; i < 2000; ++i) {
    const auto inst = env::gen_instance(cfg, gen1);
    CHECK(inst.cue_cell != inst.evidence_cell);
  }
}

TEST_CASE("gen_instance: flag-correct frequency at eta 0.3 within 3 sigma") {
  env::EnvConfig cfg = testsupport::reference_env();
  cfg.cue_noise = 0.3;
  auto gen = rng::Xoshiro256pp(3);
  const int n = 100000;
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const auto inst = env::gen_instance(cfg, gen);
    if (inst.cue_cell == inst.evidence_cell) ++correct;
  }
  const double sigma = std::sqrt(0.7 * 0.3 * n);
  CHECK(std::abs(correct - 0.7 * n) <= 3.0 * sigma);
}

TEST_CASE("observe_turn1: cue only") {
  const env::EnvConfig cfg = testsupport::reference_env();
  auto gen = rng::Xoshiro256pp(4);
  auto inst = env::gen_instance(cfg, gen);
  auto features = env::observe_turn1(inst, cfg);
  REQUIRE(static_cast<int>(features.size()) == cfg.cells());
  for (int c = 0; c < cfg.cells(); ++c) {
    CHECK(features[c] == (c == inst.cue_cell ? 1.0 : 0.0));
  }

  // perturbing cell contents never touches turn-1 features
  auto perturbed = inst;
  perturbed.cell_contents[(inst.evidence_cell + 1) % cfg.cells()] = 0;
  CHECK(env::observe_turn1(perturbed, cfg) == features);
}

TEST_CASE("observe_turn2: information barrier in hart mode") {
  const env::EnvConfig cfg = testsupport::reference_env();
  auto gen = rng::Xoshiro256pp(5);
  const auto inst = env::gen_instance(cfg, gen);

  auto on_evidence = env::observe_turn2(inst, inst.evidence_cell, cfg, gen);
  const std::size_t evidence_slot =
      static_cast<std::size_t>(inst.evidence_cell) * cfg.symbol_alphabet() + inst.answer;
  CHECK(on_evidence[evidence_slot] == 1.0);

  const int wrong = (inst.evidence_cell + 1) % cfg.cells();
  auto off_evidence = env::observe_turn2(inst, wrong, cfg, gen);
  const std::size_t null_slot =
      static_cast<std::size_t>(wrong) * cfg.symbol_alphabet() + cfg.null_symbol();
  CHECK(off_evidence[null_slot] == 1.0);
  // nothing but the null slot of the visited cell is present
  for (std::size_t j = 0; j < off_evidence.size(); ++j) {
    CHECK(off_evidence[j] == (j == null_slot ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(env::observe_turn2(inst, cfg.cells(), cfg, gen), std::invalid_argument);
}

TEST_CASE("observe_turn2: baseline leak") {
  env::EnvConfig cfg = testsupport::reference_env();
  cfg.mode = env::Mode::Baseline;
  cfg.leak_prob = 1.0;
  auto gen = rng::Xoshiro256pp(6);
  const auto inst = env::gen_instance(cfg, gen);
  const int wrong = (inst.evidence_cell + 1) % cfg.cells();
  const auto features = env::observe_turn2(inst, wrong, cfg, gen);
  const std::size_t leak_slot =
      static_cast<std::size_t>(inst.evidence_cell) * cfg.symbol_alphabet() + inst.answer;
  CHECK(features[leak_slot] == 1.0);  // answer symbol present despite wrong roi

  cfg.leak_prob = 0.0;
  const auto no_leak = env::observe_turn2(inst, wrong, cfg, gen);
  CHECK(no_leak[leak_slot] == 0.0);
}

TEST_CASE("observe_full") {
  const env::EnvConfig cfg = testsupport::reference_env();
  auto gen = rng::Xoshiro256pp(7);
  const auto inst = env::gen_instance(cfg, gen);
  const auto features = env::observe_full(inst, cfg);
  CHECK(static_cast<int>(features.size()) ==
        cfg.cells() * cfg.symbol_alphabet() + cfg.cells());

  // the answer is a deterministic function of the full observation
  int decoded = -1;
  for (int c = 0; c < cfg.cells(); ++c) {
    for (int s = 0; s < cfg.num_answers; ++s) {
      if (features[static_cast<std::size_t>(c) * cfg.symbol_alphabet() + s] == 1.0) decoded = s;
    }
  }
  CHECK(decoded == inst.answer);

  // distinct evidence cells produce distinct full observations
  auto other = inst;
  other.evidence_cell = (inst.evidence_cell + 1) % cfg.cells();
  other.cell_contents.assign(cfg.cells(), cfg.null_symbol());
  other.cell_contents[other.evidence_cell] = other.answer;
  CHECK(env::observe_full(other, cfg) != features);
}

TEST_CASE("rollout_episode: oracle policy chains deterministically") {
  env::EnvConfig cfg = testsupport::reference_env();
  cfg.cue_noise = 0.0;
  const auto oracle = env::make_oracle_policy(cfg, 200.0, 200.0);
  for (std::uint64_t e = 0; e < 500; ++e) {
    auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, e});
    const auto inst = env::gen_instance(cfg, inst_gen);
    auto roll_gen = rng::stream(cfg.seed, {env::kStreamRollout, e});
    const auto traj = env::rollout_episode(oracle, inst, cfg, roll_gen);
    CHECK(traj.grounded);
    CHECK(traj.rewarded);
  }
}

TEST_CASE("rollout_episode: uniform policy chance rates") {
  const env::EnvConfig cfg = testsupport::reference_env();
  const policy::PolicyParams uniform(env::dims_for(cfg));
  int grounded = 0, rewarded_given_miss = 0, missed = 0;
  const int n = 100000;
  for (std::uint64_t e = 0; e < n; ++e) {
    auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, e});
    const auto inst = env::gen_instance(cfg, inst_gen);
    auto roll_gen = rng::stream(cfg.seed, {env::kStreamRollout, e});
    const auto traj = env::rollout_episode(uniform, inst, cfg, roll_gen);
    if (traj.grounded) {
      ++grounded;
    } else {
      ++missed;
      if (traj.rewarded) ++rewarded_given_miss;
    }
  }
  const double p_l = 1.0 / cfg.cells();
  CHECK(std::abs(grounded - p_l * n) <= 3.0 * std::sqrt(p_l * (1 - p_l) * n));
  const double p_chance = 1.0 / cfg.num_answers;
  CHECK(std::abs(rewarded_given_miss - p_chance * missed) <=
        3.0 * std::sqrt(p_chance * (1 - p_chance) * missed));
}

TEST_CASE("rollout_episode: fixed seed reproduces the trajectory") {
  const env::EnvConfig cfg = testsupport::reference_env();
  auto gen = rng::Xoshiro256pp(8);
  const auto params = policy::PolicyParams::random(env::dims_for(cfg), gen, 0.3);
  for (std::uint64_t e = 0; e < 50; ++e) {
    auto ig1 = rng::stream(cfg.seed, {env::kStreamInstance, e});
    auto ig2 = rng::stream(cfg.seed, {env::kStreamInstance, e});
    const auto i1 = env::gen_instance(cfg, ig1);
    const auto i2 = env::gen_instance(cfg, ig2);
    CHECK(i1.evidence_cell == i2.evidence_cell);
    CHECK(i1.answer == i2.answer);
    CHECK(i1.cue_cell == i2.cue_cell);
    auto rg1 = rng::stream(cfg.seed, {env::kStreamRollout, e});
    auto rg2 = rng::stream(cfg.seed, {env::kStreamRollout, e});
    const auto t1 = env::rollout_episode(params, i1, cfg, rg1);
    const auto t2 = env::rollout_episode(params, i2, cfg, rg2);
    CHECK(t1.roi_action == t2.roi_action);
    CHECK(t1.answer_action == t2.answer_action);
    CHECK(t1.logprob_old == t2.logprob_old);
  }
}

TEST_CASE("rollout_episode rejects mismatched policies") {
  const env::EnvConfig cfg = testsupport::reference_env();
  const policy::PolicyParams wrong(policy::PolicyDims{2, 2, 2, 2});
  auto gen = rng::Xoshiro256pp(9);
  const auto inst = env::gen_instance(cfg, gen);
  CHECK_THROWS_AS(env::rollout_episode(wrong, inst, cfg, gen), std::invalid_argument);
}

TEST_CASE("dims_for matches the documented encoding sizes") {
  const env::EnvConfig cfg = testsupport::reference_env();
  const auto dims = env::dims_for(cfg);
  CHECK(dims.roi_actions == 16);
  CHECK(dims.roi_features == 16);
  CHECK(dims.answers == 4);
  CHECK(dims.answer_features == 16 * 5 + 16);
}
