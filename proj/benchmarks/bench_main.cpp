#include <benchmark/benchmark.h>

#include "hartlab/env.hpp"
#include "hartlab/optim.hpp"
#include "hartlab/policy.hpp"
#include "hartlab/rng.hpp"
#include "hartlab/stats.hpp"
#include "hartlab/trainer.hpp"

using namespace hartlab;

namespace {

env::EnvConfig bench_env() {
  env::EnvConfig cfg;
  cfg.grid_g = 4;
  cfg.num_answers = 4;
  cfg.cue_noise = 0.2;
  cfg.seed = 7;
  return cfg;
}

void BM_ActionDist(benchmark::State& state) {
  const auto cfg = bench_env();
  rng::Xoshiro256pp gen(1);
  const auto params = policy::PolicyParams::random(env::dims_for(cfg), gen, 0.5);
  auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, 0});
  const auto inst = env::gen_instance(cfg, inst_gen);
  const auto features = env::observe_turn1(inst, cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy::action_dist(params, policy::Head::Roi, features));
  }
}
BENCHMARK(BM_ActionDist);

void BM_RolloutEpisode(benchmark::State& state) {
  const auto cfg = bench_env();
  rng::Xoshiro256pp gen(2);
  const auto params = policy::PolicyParams::random(env::dims_for(cfg), gen, 0.5);
  std::uint64_t e = 0;
  for (auto _ : state) {
    auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, e});
    const auto inst = env::gen_instance(cfg, inst_gen);
    auto roll_gen = rng::stream(cfg.seed, {env::kStreamRollout, e});
    benchmark::DoNotOptimize(env::rollout_episode(params, inst, cfg, roll_gen));
    ++e;
  }
}
BENCHMARK(BM_RolloutEpisode);

void BM_GroupObjectiveGradient(benchmark::State& state) {
  const auto cfg = bench_env();
  rng::Xoshiro256pp gen(3);
  const auto params = policy::PolicyParams::random(env::dims_for(cfg), gen, 0.5);
  optim::OptimConfig ocfg;
  auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, 0});
  const auto inst = env::gen_instance(cfg, inst_gen);
  const auto group = trainer::rollout_group(params, inst, cfg, ocfg.group_size, 0, ocfg.eps_std);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        optim::objective_gradient(optim::ObjectiveKind::Apgrpo, group, params, params, ocfg));
  }
}
BENCHMARK(BM_GroupObjectiveGradient);

void BM_Evaluate1k(benchmark::State& state) {
  const auto cfg = bench_env();
  const auto oracle = env::make_oracle_policy(cfg, 12.0, 12.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer::evaluate(oracle, cfg, 1000, std::uint64_t{1} << 33, 1));
  }
}
BENCHMARK(BM_Evaluate1k);

void BM_MutualInformation(benchmark::State& state) {
  const stats::JointStats joint{1830, 502, 682, 1028};
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::mutual_information(joint));
  }
}
BENCHMARK(BM_MutualInformation);

}  // namespace

BENCHMARK_MAIN();
