#include "hartlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "hartlab/parallel.hpp"

namespace hartlab::trainer {

namespace {

constexpr std::uint64_t kStreamMcGroup = 7;
constexpr std::uint64_t kStreamProp1Seed = 8;

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

optim::TrajectoryGroup rollout_group(const policy::PolicyParams& params,
                                     const env::Instance& inst, const env::EnvConfig& cfg,
                                     int group_size, std::uint64_t group_key, double eps_std) {
  if (group_size < 2) throw std::invalid_argument("group size must be >= 2");
  optim::TrajectoryGroup group;
  group.trajectories.reserve(static_cast<std::size_t>(group_size));
  group.rewards.reserve(static_cast<std::size_t>(group_size));
  for (int member = 0; member < group_size; ++member) {
    auto gen =
        rng::stream(cfg.seed, {env::kStreamRollout, group_key, static_cast<std::uint64_t>(member)});
    group.trajectories.push_back(env::rollout_episode(params, inst, cfg, gen));
    group.rewards.push_back(group.trajectories.back().rewarded ? 1.0 : 0.0);
  }
  group.advantages = optim::group_advantages(group.rewards, eps_std);
  double mean = 0.0;
  for (double r : group.rewards) mean += r;
  group.reward_mean = mean / static_cast<double>(group_size);
  return group;
}

RlResult train_rl(const env::EnvConfig& env_cfg, const optim::OptimConfig& optim_cfg,
                  Method method, std::optional<policy::PolicyParams> init,
                  const InstanceRanges& ranges) {
  env_cfg.validate();
  optim_cfg.validate();
  if (method == Method::Apgrpo && env_cfg.mode == env::Mode::Baseline) {
    std::fprintf(stderr,
                 "warning: apgrpo with baseline-mode rewards mixes the leak channel into the "
                 "preference weights; hart mode is the intended pairing\n");
  }

  policy::PolicyParams params =
      init.has_value() ? std::move(*init) : policy::PolicyParams(env::dims_for(env_cfg));
  if (params.dims() != env::dims_for(env_cfg)) {
    throw std::invalid_argument("initial policy dims do not match env config");
  }
  const policy::PolicyParams ref = params;
  const auto kind =
      method == Method::Apgrpo ? optim::ObjectiveKind::Apgrpo : optim::ObjectiveKind::Grpo;

  RlResult result{std::move(params), {}};
  result.history.steps.reserve(static_cast<std::size_t>(optim_cfg.steps));
  for (int step = 0; step < optim_cfg.steps; ++step) {
    const std::uint64_t instance_index = ranges.rl_base + static_cast<std::uint64_t>(step);
    auto inst_gen = rng::stream(env_cfg.seed, {env::kStreamInstance, instance_index});
    const env::Instance inst = env::gen_instance(env_cfg, inst_gen);
    const optim::TrajectoryGroup group = rollout_group(
        result.params, inst, env_cfg, optim_cfg.group_size, instance_index, optim_cfg.eps_std);

    const optim::GroupEval eval = optim::eval_group(group, result.params, ref, optim_cfg, kind);
    StepMetrics m;
    m.step = step;
    m.objective = eval.objective;
    m.mean_kl = eval.mean_kl;
    m.mean_mu1 = eval.mean_mu1;
    m.mean_mu2 = eval.mean_mu2;
    double rewarded = 0.0, grounded = 0.0;
    for (const auto& traj : group.trajectories) {
      rewarded += traj.rewarded ? 1.0 : 0.0;
      grounded += traj.grounded ? 1.0 : 0.0;
    }
    m.answer_acc = rewarded / static_cast<double>(group.size());
    m.grounding_acc = grounded / static_cast<double>(group.size());
    result.history.steps.push_back(m);

    for (int epoch = 0; epoch < optim_cfg.inner_epochs; ++epoch) {
      const std::vector<double> grad =
          optim::objective_gradient(kind, group, result.params, ref, optim_cfg);
      result.params = optim::sgd_step(result.params, grad, optim_cfg.lr,
                                      optim::StepDirection::Ascent);
    }
  }
  return result;
}

policy::PolicyParams train_sft(const policy::PolicyParams& init, const env::EnvConfig& env_cfg,
                               const SftConfig& sft_cfg, const InstanceRanges& ranges,
                               std::uint64_t rl_indices_used) {
  env_cfg.validate();
  if (sft_cfg.n_examples < 1) throw std::invalid_argument("sft.examples must be >= 1");
  if (!(sft_cfg.lr > 0.0)) throw std::invalid_argument("sft.lr must be > 0");
  if (sft_cfg.steps < 0) throw std::invalid_argument("sft.steps must be >= 0");

  const std::uint64_t sft_end = ranges.sft_base + static_cast<std::uint64_t>(sft_cfg.n_examples);
  const std::uint64_t rl_end = ranges.rl_base + rl_indices_used;
  if (ranges.sft_base < rl_end && ranges.rl_base < sft_end) {
    throw std::invalid_argument("dataset separation violated");
  }

  std::vector<optim::SftExample> dataset;
  dataset.reserve(static_cast<std::size_t>(sft_cfg.n_examples));
  for (int j = 0; j < sft_cfg.n_examples; ++j) {
    auto gen = rng::stream(env_cfg.seed,
                           {env::kStreamInstance, ranges.sft_base + static_cast<std::uint64_t>(j)});
    const env::Instance inst = env::gen_instance(env_cfg, gen);
    dataset.push_back(optim::SftExample{env::observe_full(inst, env_cfg), inst.answer});
  }

  policy::PolicyParams params = init;
  for (int step = 0; step < sft_cfg.steps; ++step) {
    const std::vector<double> grad = optim::sft_gradient(params, dataset);
    params = optim::sgd_step(params, grad, sft_cfg.lr, optim::StepDirection::Descent);
  }
  return params;
}

double sft_answer_accuracy(const policy::PolicyParams& params, const env::EnvConfig& cfg,
                           std::uint64_t n_instances, std::uint64_t instance_base) {
  if (n_instances == 0) throw std::invalid_argument("need at least one instance");
  std::uint64_t correct = 0;
  for (std::uint64_t i = 0; i < n_instances; ++i) {
    auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, instance_base + i});
    const env::Instance inst = env::gen_instance(cfg, inst_gen);
    const auto features = env::observe_full(inst, cfg);
    const auto dist = policy::action_dist(params, policy::Head::Answer, features);
    // greedy decoding: the stage-2 quality measure is classification accuracy
    const auto best = std::max_element(dist.probs.begin(), dist.probs.end());
    if (static_cast<int>(best - dist.probs.begin()) == inst.answer) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n_instances);
}

EvalReport evaluate(const policy::PolicyParams& params, const env::EnvConfig& cfg,
                    std::uint64_t n_episodes, std::uint64_t eval_base, int threads) {
  if (n_episodes == 0) throw std::invalid_argument("need at least one episode");
  cfg.validate();
  if (params.dims() != env::dims_for(cfg)) {
    throw std::invalid_argument("policy dims do not match env config");
  }

  const int workers = parallel::resolve_threads(threads);
  std::vector<stats::JointStats> partial(static_cast<std::size_t>(workers) + 1);
  parallel::for_chunks(n_episodes, workers, [&](int chunk, std::uint64_t begin, std::uint64_t end) {
    stats::JointStats local;
    for (std::uint64_t e = begin; e < end; ++e) {
      auto inst_gen = rng::stream(cfg.seed, {env::kStreamInstance, eval_base + e});
      const env::Instance inst = env::gen_instance(cfg, inst_gen);
      auto roll_gen = rng::stream(cfg.seed, {env::kStreamEvalRollout, eval_base + e});
      const env::Trajectory traj = env::rollout_episode(params, inst, cfg, roll_gen);
      if (traj.grounded) {
        traj.rewarded ? ++local.n11 : ++local.n10;
      } else {
        traj.rewarded ? ++local.n01 : ++local.n00;
      }
    }
    partial[static_cast<std::size_t>(chunk)] = local;
  });

  EvalReport report;
  for (const auto& p : partial) {
    report.joint.n11 += p.n11;
    report.joint.n01 += p.n01;
    report.joint.n10 += p.n10;
    report.joint.n00 += p.n00;
  }
  report.episodes = n_episodes;
  const double total = static_cast<double>(report.joint.total());
  report.answer_accuracy = static_cast<double>(report.joint.n11 + report.joint.n01) / total;
  report.grounding_accuracy = static_cast<double>(report.joint.n11 + report.joint.n10) / total;
  report.mi_nats = stats::mutual_information(report.joint);
  return report;
}

Prop1Report prop1_diagnostic(const env::EnvConfig& hart_cfg, const env::EnvConfig& baseline_cfg,
                             const policy::PolicyParams& params, std::uint64_t episodes,
                             int n_seeds, int threads) {
  if (hart_cfg.mode != env::Mode::Hart || baseline_cfg.mode != env::Mode::Baseline) {
    throw std::invalid_argument("config pair must be (hart, baseline)");
  }
  const bool same_otherwise = hart_cfg.grid_g == baseline_cfg.grid_g &&
                              hart_cfg.num_answers == baseline_cfg.num_answers &&
                              hart_cfg.cue_noise == baseline_cfg.cue_noise &&
                              hart_cfg.leak_prob == baseline_cfg.leak_prob &&
                              hart_cfg.seed == baseline_cfg.seed;
  if (!same_otherwise) throw std::invalid_argument("configs must differ only in mode");
  if (n_seeds < 1) throw std::invalid_argument("need at least one seed");

  Prop1Report report;
  report.episodes_per_mode = episodes;
  std::vector<double> diffs;
  int hart_greater = 0;
  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed =
        rng::derive_seed(hart_cfg.seed, {kStreamProp1Seed, static_cast<std::uint64_t>(s)});
    env::EnvConfig h = hart_cfg;
    env::EnvConfig b = baseline_cfg;
    h.seed = seed;
    b.seed = seed;
    Prop1Seed row;
    row.seed = seed;
    row.mi_hart = evaluate(params, h, episodes, std::uint64_t{1} << 33, threads).mi_nats;
    row.mi_baseline = evaluate(params, b, episodes, std::uint64_t{1} << 33, threads).mi_nats;
    row.diff = row.mi_hart - row.mi_baseline;
    diffs.push_back(row.diff);
    if (row.diff > 0.0) ++hart_greater;
    report.per_seed.push_back(row);
  }
  report.median_diff = median(diffs);
  report.frac_hart_greater = static_cast<double>(hart_greater) / static_cast<double>(n_seeds);
  return report;
}

void SingleStepEnvSpec::validate() const {
  if (num_actions < 2) throw std::invalid_argument("single-step env needs >= 2 actions");
  if (correct_action < 0 || correct_action >= num_actions) {
    throw std::invalid_argument("correct_action out of range");
  }
  if (features.empty()) throw std::invalid_argument("single-step env needs features");
  if (!(p_reward_given_correct >= 0.0 && p_reward_given_correct <= 1.0) ||
      !(p_reward_given_incorrect >= 0.0 && p_reward_given_incorrect <= 1.0)) {
    throw std::invalid_argument("reward channel probabilities must be in [0,1]");
  }
}

namespace {

struct SingleStepContext {
  policy::ActionDistribution dist;
  double p_reward = 0.0;  // population P(r=1)
  double denom = 0.0;     // max(population std, eps_std); 0 marks the all-equal case
};

SingleStepContext single_step_context(const policy::PolicyParams& params,
                                      const SingleStepEnvSpec& env_spec,
                                      const optim::OptimConfig& cfg) {
  env_spec.validate();
  if (params.dims().roi_actions != env_spec.num_actions ||
      params.dims().roi_features != static_cast<int>(env_spec.features.size())) {
    throw std::invalid_argument("policy roi head does not match single-step env");
  }

  SingleStepContext ctx;
  ctx.dist = policy::action_dist(params, policy::Head::Roi, env_spec.features);
  for (int a = 0; a < env_spec.num_actions; ++a) {
    const double q = a == env_spec.correct_action ? env_spec.p_reward_given_correct
                                                  : env_spec.p_reward_given_incorrect;
    ctx.p_reward += ctx.dist.probs[a] * q;
  }
  const double var = ctx.p_reward * (1.0 - ctx.p_reward);
  ctx.denom = var > 0.0 ? std::max(std::sqrt(var), cfg.eps_std) : 0.0;
  return ctx;
}

double member_weight(optim::ObjectiveKind kind, double reward, double p_reward, double denom,
                     double k) {
  if (denom == 0.0) return 0.0;  // all-equal rewards: zero advantages
  const double advantage = (reward - p_reward) / denom;
  const double mu1 = kind == optim::ObjectiveKind::Apgrpo ? 1.0 + k * (reward - p_reward) : 1.0;
  return mu1 * advantage;
}

}  // namespace

std::vector<double> exact_expected_gradient(const policy::PolicyParams& params,
                                            const SingleStepEnvSpec& env_spec,
                                            optim::ObjectiveKind kind,
                                            const optim::OptimConfig& cfg) {
  if (kind == optim::ObjectiveKind::Sft) {
    throw std::invalid_argument("single-step diagnostic covers grpo/apgrpo only");
  }
  if (2ull * static_cast<std::uint64_t>(env_spec.num_actions) > 1000000ull) {
    throw std::invalid_argument("enumeration budget exceeded");
  }
  const SingleStepContext ctx = single_step_context(params, env_spec, cfg);

  std::vector<double> grad(params.dims().total(), 0.0);
  if (ctx.denom == 0.0) return grad;
  for (int a = 0; a < env_spec.num_actions; ++a) {
    const double q = a == env_spec.correct_action ? env_spec.p_reward_given_correct
                                                  : env_spec.p_reward_given_incorrect;
    for (int r = 0; r <= 1; ++r) {
      const double mass = ctx.dist.probs[a] * (r == 1 ? q : 1.0 - q);
      if (mass == 0.0) continue;
      const double w =
          member_weight(kind, static_cast<double>(r), ctx.p_reward, ctx.denom, cfg.k);
      if (w == 0.0) continue;
      policy::accumulate_grad_log_prob(params, policy::Head::Roi, env_spec.features, ctx.dist, a,
                                       mass * w, grad);
    }
  }
  return grad;
}

McGradient mc_expected_gradient(const policy::PolicyParams& params,
                                const SingleStepEnvSpec& env_spec, optim::ObjectiveKind kind,
                                const optim::OptimConfig& cfg, std::uint64_t n_groups,
                                std::uint64_t seed) {
  if (kind == optim::ObjectiveKind::Sft) {
    throw std::invalid_argument("single-step diagnostic covers grpo/apgrpo only");
  }
  if (n_groups == 0) throw std::invalid_argument("need at least one group");
  const SingleStepContext ctx = single_step_context(params, env_spec, cfg);

  const std::size_t dim = params.dims().total();
  McGradient out;
  out.mean.assign(dim, 0.0);
  out.variance.assign(dim, 0.0);
  out.groups = n_groups;

  std::vector<double> group_grad(dim, 0.0);
  std::vector<double> m2(dim, 0.0);
  const double inv_g = 1.0 / static_cast<double>(cfg.group_size);
  for (std::uint64_t g = 0; g < n_groups; ++g) {
    std::fill(group_grad.begin(), group_grad.end(), 0.0);
    auto gen = rng::stream(seed, {kStreamMcGroup, g});
    for (int member = 0; member < cfg.group_size; ++member) {
      const int a = policy::sample_action(ctx.dist, gen);
      const double q = a == env_spec.correct_action ? env_spec.p_reward_given_correct
                                                    : env_spec.p_reward_given_incorrect;
      const double reward = gen.next_double() < q ? 1.0 : 0.0;
      const double w = member_weight(kind, reward, ctx.p_reward, ctx.denom, cfg.k);
      if (w != 0.0) {
        policy::accumulate_grad_log_prob(params, policy::Head::Roi, env_spec.features, ctx.dist, a,
                                         inv_g * w, group_grad);
      }
    }
    // Welford over group-level gradient samples
    const double count = static_cast<double>(g + 1);
    for (std::size_t j = 0; j < dim; ++j) {
      const double delta = group_grad[j] - out.mean[j];
      out.mean[j] += delta / count;
      m2[j] += delta * (group_grad[j] - out.mean[j]);
    }
  }
  if (n_groups > 1) {
    for (std::size_t j = 0; j < dim; ++j) {
      out.variance[j] = m2[j] / static_cast<double>(n_groups - 1);
    }
  }
  return out;
}

DecompositionFit fit_decomposition(std::span<const double> d, std::span<const double> v) {
  if (d.size() != v.size()) throw std::invalid_argument("decomposition vectors differ in size");
  constexpr double kTiny = 1e-300;

  DecompositionFit fit;
  double dd = 0.0, vv = 0.0, dv = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    dd += d[j] * d[j];
    vv += v[j] * v[j];
    dv += d[j] * v[j];
  }
  fit.d_norm = std::sqrt(dd);
  fit.v_norm = std::sqrt(vv);
  fit.d_dot_v = dv;

  if (fit.v_norm <= kTiny) {
    fit.vacuous = fit.d_norm <= kTiny;
    fit.degenerate = !fit.vacuous;
    fit.alpha_in_unit = fit.vacuous;
    return fit;
  }
  fit.alpha = dv / vv;
  double res2 = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    const double r = d[j] - fit.alpha * v[j];
    res2 += r * r;
  }
  fit.residual = std::sqrt(res2) / std::max(fit.d_norm, kTiny);
  fit.alpha_in_unit = fit.alpha >= 0.0 && fit.alpha <= 1.0;
  return fit;
}

namespace {

// P(L=0, r=1) * E_{L=0, r=1}[grad log pi], computed as the unnormalized sum
// over incorrect actions.
std::vector<double> misspecified_direction(const policy::PolicyParams& params,
                                           const SingleStepEnvSpec& env_spec,
                                           const policy::ActionDistribution& dist) {
  std::vector<double> v(params.dims().total(), 0.0);
  for (int a = 0; a < env_spec.num_actions; ++a) {
    if (a == env_spec.correct_action) continue;
    const double mass = dist.probs[a] * env_spec.p_reward_given_incorrect;
    if (mass == 0.0) continue;
    policy::accumulate_grad_log_prob(params, policy::Head::Roi, env_spec.features, dist, a, mass,
                                     v);
  }
  return v;
}

std::vector<double> subtract(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

}  // namespace

Prop2Report prop2_diagnostic(const policy::PolicyParams& params, const SingleStepEnvSpec& hart,
                             const SingleStepEnvSpec& baseline, const optim::OptimConfig& cfg) {
  const auto g_ap_hart = exact_expected_gradient(params, hart, optim::ObjectiveKind::Apgrpo, cfg);
  const auto g_grpo_hart = exact_expected_gradient(params, hart, optim::ObjectiveKind::Grpo, cfg);
  const auto g_grpo_base =
      exact_expected_gradient(params, baseline, optim::ObjectiveKind::Grpo, cfg);

  const auto dist_hart = policy::action_dist(params, policy::Head::Roi, hart.features);
  const auto dist_base = policy::action_dist(params, policy::Head::Roi, baseline.features);
  const auto v_hart = misspecified_direction(params, hart, dist_hart);
  const auto v_base = misspecified_direction(params, baseline, dist_base);

  Prop2Report report;
  report.same_channel = fit_decomposition(subtract(g_grpo_hart, g_ap_hart), v_hart);
  report.cross_channel = fit_decomposition(subtract(g_grpo_base, g_ap_hart), v_base);
  report.p01_hart =
      (1.0 - dist_hart.probs[hart.correct_action]) * hart.p_reward_given_incorrect;
  report.p01_baseline =
      (1.0 - dist_base.probs[baseline.correct_action]) * baseline.p_reward_given_incorrect;
  report.direction_cross = v_base;
  return report;
}

}  // namespace hartlab::trainer
