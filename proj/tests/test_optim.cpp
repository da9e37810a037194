#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hartlab/optim.hpp"
#include "hartlab/rng.hpp"
#include "test_support.hpp"

using namespace hartlab;
using optim::ObjectiveKind;
using optim::OptimConfig;
using optim::TrajectoryGroup;
using policy::PolicyParams;

namespace {

OptimConfig test_cfg() {
  OptimConfig cfg;
  cfg.group_size = 6;
  cfg.beta = 0.1;
  cfg.k = 0.6;
  return cfg;
}

PolicyParams env_policy(const env::EnvConfig& cfg, std::uint64_t seed, double scale) {
  rng::Xoshiro256pp gen(seed);
  return PolicyParams::random(env::dims_for(cfg), gen, scale);
}

}  // namespace

TEST_CASE("group_advantages") {
  const std::vector<double> a = optim::group_advantages(std::vector<double>{1, 0, 1, 0}, 1e-8);
  CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a[3] == doctest::Approx(-1.0).epsilon(1e-12));

  for (double v : optim::group_advantages(std::vector<double>{1, 1, 1, 1}, 1e-8)) {
    CHECK(v == 0.0);  // all-equal rule, exactly zero
  }

  const std::vector<double> b = optim::group_advantages(std::vector<double>{1, 0, 0, 0}, 1e-8);
  CHECK(b[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  for (int i = 1; i < 4; ++i) CHECK(b[i] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("group_advantages: zero sum and unit population std") {
  rng::Xoshiro256pp gen(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const int g = 2 + static_cast<int>(gen.next_below(63));
    std::vector<double> rewards(g);
    for (double& r : rewards) r = gen.next_double() < 0.5 ? 1.0 : 0.0;
    const auto adv = optim::group_advantages(rewards, 1e-8);

    double sum = 0.0;
    for (double v : adv) sum += v;
    CHECK(std::abs(sum) <= 1e-10);

    const bool all_equal = std::all_of(rewards.begin(), rewards.end(),
                                       [&](double r) { return r == rewards[0]; });
    if (all_equal) {
      for (double v : adv) CHECK(v == 0.0);
    } else {
      double var = 0.0;
      for (double v : adv) var += v * v;
      var /= g;
      CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("apgrpo_weights") {
  OptimConfig cfg = test_cfg();
  cfg.beta = 0.2;

  const auto w = optim::apgrpo_weights(1.0, 0.5, cfg);
  CHECK(w.mu1 == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(w.mu2 == doctest::Approx(0.7 * cfg.beta).epsilon(1e-12));

  const auto at_mean = optim::apgrpo_weights(0.5, 0.5, cfg);
  CHECK(at_mean.mu1 == 1.0);
  CHECK(at_mean.mu2 == cfg.beta);

  cfg.k = 0.0;
  for (double r : {0.0, 1.0}) {
    const auto w0 = optim::apgrpo_weights(r, 0.3, cfg);
    CHECK(w0.mu1 == 1.0);
    CHECK(w0.mu2 == cfg.beta);
  }

  CHECK_THROWS_AS(optim::apgrpo_weights(1.0, 1.5, test_cfg()), std::invalid_argument);
}

TEST_CASE("apgrpo_weights: group identities") {
  rng::Xoshiro256pp gen(42);
  OptimConfig cfg = test_cfg();
  for (int trial = 0; trial < 2000; ++trial) {
    const int g = 2 + static_cast<int>(gen.next_below(63));
    cfg.k = 0.01 + 0.99 * gen.next_double();
    cfg.beta = gen.next_double();
    std::vector<double> rewards(g);
    double mean = 0.0;
    for (double& r : rewards) {
      r = gen.next_double() < 0.5 ? 1.0 : 0.0;
      mean += r;
    }
    mean /= g;

    double mu1_sum = 0.0, mu2_sum = 0.0;
    for (double r : rewards) {
      const auto w = optim::apgrpo_weights(r, mean, cfg);
      CHECK(w.mu1 >= 0.0);
      CHECK(w.mu2 >= 0.0);
      if (cfg.beta > 0.0) {
        CHECK(w.mu1 + w.mu2 / cfg.beta == doctest::Approx(2.0).epsilon(1e-12));
      }
      // strict preference exactly when the sample is correct and not all are
      CHECK((w.mu1 > 1.0) == (r == 1.0 && mean < 1.0));
      CHECK((w.mu2 < cfg.beta) == (r == 1.0 && mean < 1.0 && cfg.beta > 0.0));
      mu1_sum += w.mu1;
      mu2_sum += w.mu2;
    }
    // identities hold at machine precision (roundoff only, no statistical slack)
    CHECK(std::abs(mu1_sum / g - 1.0) <= 16 * 2.220446049250313e-16);
    CHECK(std::abs(mu2_sum / g - cfg.beta) <= 16 * 2.220446049250313e-16 * std::max(1.0, cfg.beta));
  }
}

TEST_CASE("objectives: ratio 1 and zero KL at the snapshot point") {
  const auto cfg = testsupport::small_env(3);
  const auto params = env_policy(cfg, 5, 0.5);
  auto ocfg = test_cfg();
  for (std::uint64_t key = 0; key < 5; ++key) {
    const auto group = testsupport::random_group(cfg, params, key, ocfg.group_size);
    // params == old == ref: grpo objective = mean advantage = 0
    CHECK(optim::grpo_objective(group, params, params, ocfg) ==
          doctest::Approx(0.0).epsilon(1e-10));
    // apgrpo at the same point keeps the preference term: mean(mu1 A) equals
    // k times the population reward std
    double var = 0.0;
    for (double r : group.rewards) var += (r - group.reward_mean) * (r - group.reward_mean);
    const double pop_std = std::sqrt(var / group.size());
    CHECK(optim::apgrpo_objective(group, params, params, ocfg) ==
          doctest::Approx(ocfg.k * pop_std).epsilon(1e-10));
  }
}

TEST_CASE("objectives: hand-computed single-trajectory value") {
  // beta = 0, one trajectory, A = 1, log-prob gap ln 2 under the new params
  const auto cfg = testsupport::small_env(4);
  const auto params = env_policy(cfg, 6, 0.4);
  auto group = testsupport::random_group(cfg, params, 0, 2);
  group.trajectories.resize(1);
  group.rewards = {1.0};
  group.advantages = {1.0};
  group.reward_mean = 1.0;
  // shift the stored old log-prob so the ratio becomes exp(ln 2) = 2
  group.trajectories[0].logprob_old -= std::log(2.0);

  auto ocfg = test_cfg();
  ocfg.beta = 0.0;
  CHECK(optim::grpo_objective(group, params, params, ocfg) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("objectives: two-trajectory apgrpo value 0.3") {
  // rewards (1,0), k = 0.6, beta = 0, params at the snapshot:
  // (1/2)(1.3*1 + 0.7*(-1)) = 0.3
  const auto cfg = testsupport::small_env(8);
  const auto params = env_policy(cfg, 7, 0.4);
  auto group = testsupport::random_group(cfg, params, 1, 2);
  group.rewards = {1.0, 0.0};
  group.advantages = optim::group_advantages(group.rewards, 1e-8);
  group.reward_mean = 0.5;

  auto ocfg = test_cfg();
  ocfg.beta = 0.0;
  ocfg.k = 0.6;
  CHECK(optim::apgrpo_objective(group, params, params, ocfg) ==
        doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("apgrpo with k = 0 is bitwise grpo") {
  const auto cfg = testsupport::small_env(9);
  const auto actor = env_policy(cfg, 8, 0.5);
  const auto params = env_policy(cfg, 9, 0.5);
  const auto ref = env_policy(cfg, 10, 0.5);
  auto ocfg = test_cfg();
  ocfg.k = 0.0;
  for (std::uint64_t key = 0; key < 10; ++key) {
    const auto group = testsupport::random_group(cfg, actor, key, ocfg.group_size);
    CHECK(optim::apgrpo_objective(group, params, ref, ocfg) ==
          optim::grpo_objective(group, params, ref, ocfg));
    const auto ga = optim::objective_gradient(ObjectiveKind::Apgrpo, group, params, ref, ocfg);
    const auto gg = optim::objective_gradient(ObjectiveKind::Grpo, group, params, ref, ocfg);
    for (std::size_t j = 0; j < ga.size(); ++j) CHECK(ga[j] == gg[j]);
  }
}

TEST_CASE("apgrpo equals grpo when all rewards are equal") {
  const auto cfg = testsupport::small_env(10);
  const auto params = env_policy(cfg, 11, 0.5);
  const auto ref = env_policy(cfg, 12, 0.5);
  auto ocfg = test_cfg();

  auto group = testsupport::random_group(cfg, params, 2, 4);
  group.rewards = {1.0, 1.0, 1.0, 1.0};
  group.advantages = optim::group_advantages(group.rewards, 1e-8);
  group.reward_mean = 1.0;

  const double apgrpo = optim::apgrpo_objective(group, params, ref, ocfg);
  const double grpo = optim::grpo_objective(group, params, ref, ocfg);
  CHECK(apgrpo == grpo);
  // zero advantages leave only the KL term: objective = -beta * mean KL
  const auto eval = optim::eval_group(group, params, ref, ocfg, ObjectiveKind::Apgrpo);
  CHECK(eval.objective == doctest::Approx(-ocfg.beta * eval.mean_kl).epsilon(1e-12));
  CHECK(eval.mean_mu1 == 1.0);
  CHECK(eval.mean_mu2 == ocfg.beta);
}

TEST_CASE("objective gradients match finite differences") {
  const auto cfg = testsupport::small_env(11);
  const auto actor = env_policy(cfg, 13, 0.5);
  auto ocfg = test_cfg();
  const auto ref = env_policy(cfg, 14, 0.5);

  for (std::uint64_t key = 0; key < 6; ++key) {
    const auto group = testsupport::random_group(cfg, actor, key, ocfg.group_size);
    // evaluate away from the snapshot so the ratio term is nontrivial
    const auto params = env_policy(cfg, 20 + key, 0.5);
    for (auto kind : {ObjectiveKind::Grpo, ObjectiveKind::Apgrpo}) {
      const auto analytic = optim::objective_gradient(kind, group, params, ref, ocfg);
      const auto f = [&](std::span<const double> flat) {
        PolicyParams q(params.dims());
        std::copy(flat.begin(), flat.end(), q.flat().begin());
        return kind == ObjectiveKind::Grpo ? optim::grpo_objective(group, q, ref, ocfg)
                                           : optim::apgrpo_objective(group, q, ref, ocfg);
      };
      const auto numeric = optim::finite_diff_gradient(f, params.flat(), 1e-5);
      CHECK(testsupport::rel_error(analytic, numeric) < 1e-5);
    }
  }
}

TEST_CASE("zero-advantage group with beta 0 has zero gradient") {
  const auto cfg = testsupport::small_env(12);
  const auto params = env_policy(cfg, 15, 0.5);
  auto ocfg = test_cfg();
  ocfg.beta = 0.0;
  auto group = testsupport::random_group(cfg, params, 3, 4);
  group.rewards = {0.0, 0.0, 0.0, 0.0};
  group.advantages = optim::group_advantages(group.rewards, 1e-8);
  group.reward_mean = 0.0;
  const auto grad = optim::objective_gradient(ObjectiveKind::Grpo, group, params, params, ocfg);
  for (double v : grad) CHECK(v == 0.0);
}

TEST_CASE("stale group is rejected") {
  const auto cfg = testsupport::small_env(13);
  const auto params = env_policy(cfg, 16, 0.5);
  auto group = testsupport::random_group(cfg, params, 4, 4);
  group.trajectories[1].logprob_old = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(optim::grpo_objective(group, params, params, test_cfg()),
                       "stale group: old log-probabilities missing", std::invalid_argument);
}

TEST_CASE("sft_loss") {
  const auto cfg = testsupport::small_env(14);
  auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, 900});
  std::vector<optim::SftExample> dataset;
  for (int i = 0; i < 16; ++i) {
    const auto inst = env::gen_instance(cfg, inst_gen);
    dataset.push_back(optim::SftExample{env::observe_full(inst, cfg), inst.answer});
  }

  // uniform policy: loss is exactly ln M
  const PolicyParams uniform(env::dims_for(cfg));
  CHECK(optim::sft_loss(uniform, dataset) ==
        doctest::Approx(std::log(cfg.num_answers)).epsilon(1e-12));

  // saturated policy: margins above 20 push the loss below 1e-6
  const auto oracle = env::make_oracle_policy(cfg, 0.0, 25.0);
  CHECK(optim::sft_loss(oracle, dataset) < 1e-6);

  CHECK_THROWS_WITH_AS(optim::sft_loss(uniform, std::vector<optim::SftExample>{}),
                       "empty dataset", std::invalid_argument);
}

TEST_CASE("sft gradient matches finite differences") {
  const auto cfg = testsupport::small_env(15);
  auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, 901});
  std::vector<optim::SftExample> dataset;
  for (int i = 0; i < 8; ++i) {
    const auto inst = env::gen_instance(cfg, inst_gen);
    dataset.push_back(optim::SftExample{env::observe_full(inst, cfg), inst.answer});
  }
  const auto params = env_policy(cfg, 17, 0.5);
  const auto analytic = optim::sft_gradient(params, dataset);
  const auto f = [&](std::span<const double> flat) {
    PolicyParams q(params.dims());
    std::copy(flat.begin(), flat.end(), q.flat().begin());
    return optim::sft_loss(q, dataset);
  };
  const auto numeric = optim::finite_diff_gradient(f, params.flat(), 1e-5);
  CHECK(testsupport::rel_error(analytic, numeric) < 1e-5);
}

TEST_CASE("sgd_step") {
  const auto cfg = testsupport::small_env(16);
  const auto params = env_policy(cfg, 18, 0.5);
  std::vector<double> grad(params.dims().total(), 0.25);

  const auto unchanged = optim::sgd_step(params, grad, 0.0, optim::StepDirection::Ascent);
  for (std::size_t j = 0; j < grad.size(); ++j) CHECK(unchanged.flat()[j] == params.flat()[j]);

  const auto up1 = optim::sgd_step(params, grad, 0.1, optim::StepDirection::Ascent);
  const auto up2 = optim::sgd_step(params, grad, 0.1, optim::StepDirection::Ascent);
  for (std::size_t j = 0; j < grad.size(); ++j) {
    CHECK(up1.flat()[j] == up2.flat()[j]);
    CHECK(up1.flat()[j] == doctest::Approx(params.flat()[j] + 0.025).epsilon(1e-12));
  }
  const auto down = optim::sgd_step(params, grad, 0.1, optim::StepDirection::Descent);
  CHECK(down.flat()[0] == doctest::Approx(params.flat()[0] - 0.025).epsilon(1e-12));

  CHECK_THROWS_AS(optim::sgd_step(params, std::vector<double>{1.0}, 0.1,
                                  optim::StepDirection::Ascent),
                  std::invalid_argument);
}

TEST_CASE("ascent on a fixed group increases the objective monotonically") {
  const auto cfg = testsupport::small_env(17);
  auto params = env_policy(cfg, 19, 0.4);
  auto ocfg = test_cfg();
  ocfg.beta = 0.0;
  const auto group = testsupport::random_group(cfg, params, 5, 6);
  const auto ref = params;

  double last = optim::grpo_objective(group, params, ref, ocfg);
  for (int step = 0; step < 100; ++step) {
    const auto grad = optim::objective_gradient(ObjectiveKind::Grpo, group, params, ref, ocfg);
    params = optim::sgd_step(params, grad, 1e-2, optim::StepDirection::Ascent);
    const double cur = optim::grpo_objective(group, params, ref, ocfg);
    CHECK(cur >= last - 1e-12);
    last = cur;
  }
}

TEST_CASE("finite_diff_gradient on polynomials") {
  const std::vector<double> at{0.5, -1.25, 2.0};
  const auto quadratic = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const auto g = optim::finite_diff_gradient(quadratic, at, 1e-4);
  for (std::size_t j = 0; j < at.size(); ++j) {
    CHECK(std::abs(g[j] - 2.0 * at[j]) < 1e-8);
  }

  const auto linear = [](std::span<const double> x) { return 3.0 * x[0] - 2.0 * x[1] + x[2]; };
  // linear functions have no truncation error, only roundoff of order eps/h
  const auto gl = optim::finite_diff_gradient(linear, at, 1e-4);
  CHECK(gl[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(gl[1] == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(gl[2] == doctest::Approx(1.0).epsilon(1e-10));

  CHECK_THROWS_AS(optim::finite_diff_gradient(quadratic, at, 0.0), std::invalid_argument);
}

TEST_CASE("reward group validation") {
  optim::RewardGroup g{{1.0, 0.0, 0.5}};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  optim::RewardGroup short_group{{1.0}};
  CHECK_THROWS_AS(short_group.validate(), std::invalid_argument);
  optim::RewardGroup ok{{1.0, 0.0}};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("optional ratio clip is off by default and clamps when enabled") {
  const auto cfg = testsupport::small_env(18);
  const auto params = env_policy(cfg, 21, 0.4);
  auto group = testsupport::random_group(cfg, params, 6, 2);
  group.rewards = {1.0, 0.0};
  group.advantages = optim::group_advantages(group.rewards, 1e-8);
  group.reward_mean = 0.5;
  group.trajectories[0].logprob_old -= std::log(4.0);  // ratio 4 on the positive-advantage member
  group.trajectories[1].logprob_old -= std::log(4.0);

  auto ocfg = test_cfg();
  ocfg.beta = 0.0;
  const double unclipped = optim::grpo_objective(group, params, params, ocfg);
  ocfg.clip_ratio = 0.2;
  const double clipped = optim::grpo_objective(group, params, params, ocfg);
  CHECK(unclipped == doctest::Approx(0.5 * (4.0 - 4.0)).epsilon(1e-9));
  CHECK(clipped == doctest::Approx(0.5 * (1.2 - 4.0)).epsilon(1e-9));
}
