#include "hartlab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hartlab::optim {

void OptimConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("optim.group_size must be >= 2");
  if (!(beta >= 0.0)) throw std::invalid_argument("optim.beta must be >= 0");
  if (!(k >= 0.0 && k <= 1.0)) throw std::invalid_argument("optim.k must be in [0,1]");
  if (!(lr > 0.0)) throw std::invalid_argument("optim.lr must be > 0");
  if (!(eps_std > 0.0)) throw std::invalid_argument("optim.eps_std must be > 0");
  if (steps < 0) throw std::invalid_argument("optim.steps must be >= 0");
  if (!(clip_ratio >= 0.0)) throw std::invalid_argument("optim.clip_ratio must be >= 0");
  if (inner_epochs < 1) throw std::invalid_argument("optim.inner_epochs must be >= 1");
}

void RewardGroup::validate() const {
  if (rewards.size() < 2) throw std::invalid_argument("reward group needs G >= 2");
  for (double r : rewards) {
    if (r != 0.0 && r != 1.0) throw std::invalid_argument("rewards must be exactly 0 or 1");
  }
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps_std) {
  if (rewards.empty()) throw std::invalid_argument("empty reward group");

  const bool all_equal =
      std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
  if (all_equal) return std::vector<double>(rewards.size(), 0.0);

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  const double denom = std::max(std::sqrt(var), eps_std);

  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

ApWeights apgrpo_weights(double reward, double reward_mean, const OptimConfig& cfg) {
  if (!(reward_mean >= 0.0 && reward_mean <= 1.0)) {
    throw std::invalid_argument("reward mean must be in [0,1]");
  }
  const double preference = cfg.k * (reward - reward_mean);
  return ApWeights{1.0 + preference, cfg.beta * (1.0 - preference)};
}

namespace {

void check_group(const TrajectoryGroup& group) {
  if (group.trajectories.empty()) throw std::invalid_argument("empty trajectory group");
  if (group.rewards.size() != group.trajectories.size() ||
      group.advantages.size() != group.trajectories.size()) {
    throw std::invalid_argument("group rewards/advantages out of sync with trajectories");
  }
  for (const auto& traj : group.trajectories) {
    if (!traj.has_old_logprob()) {
      throw std::invalid_argument("stale group: old log-probabilities missing");
    }
  }
}

ApWeights weights_for(ObjectiveKind kind, double reward, double reward_mean,
                      const OptimConfig& cfg) {
  if (kind == ObjectiveKind::Grpo) return ApWeights{1.0, cfg.beta};
  return apgrpo_weights(reward, reward_mean, cfg);
}

// ratio-term surrogate and whether the gradient flows through it
struct Surrogate {
  double value = 0.0;
  bool pass_through = true;
};

Surrogate ratio_surrogate(double ratio, double advantage, double clip_ratio) {
  const double plain = ratio * advantage;
  if (clip_ratio <= 0.0) return Surrogate{plain, true};
  const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantage;
  if (plain <= clipped) return Surrogate{plain, true};
  return Surrogate{clipped, ratio >= 1.0 - clip_ratio && ratio <= 1.0 + clip_ratio};
}

}  // namespace

GroupEval eval_group(const TrajectoryGroup& group, const policy::PolicyParams& params,
                     const policy::PolicyParams& ref_params, const OptimConfig& cfg,
                     ObjectiveKind kind) {
  if (kind == ObjectiveKind::Sft) throw std::invalid_argument("sft is not a group objective");
  check_group(group);

  const double inv_g = 1.0 / static_cast<double>(group.size());
  GroupEval out;
  double obj = 0.0, kl_sum = 0.0, mu1_sum = 0.0, mu2_sum = 0.0, ratio_sum = 0.0;
  for (int i = 0; i < group.size(); ++i) {
    const env::Trajectory& traj = group.trajectories[i];
    const auto roi_dist = policy::action_dist(params, policy::Head::Roi, traj.turn1_features);
    const auto ans_dist = policy::action_dist(params, policy::Head::Answer, traj.turn2_features);
    const double lp_new =
        roi_dist.log_probs[traj.roi_action] + ans_dist.log_probs[traj.answer_action];
    const double ratio = std::exp(lp_new - traj.logprob_old);

    const auto roi_ref = policy::action_dist(ref_params, policy::Head::Roi, traj.turn1_features);
    const auto ans_ref =
        policy::action_dist(ref_params, policy::Head::Answer, traj.turn2_features);
    const double kl = policy::kl_exact(roi_dist, roi_ref) + policy::kl_exact(ans_dist, ans_ref);

    const ApWeights w = weights_for(kind, group.rewards[i], group.reward_mean, cfg);
    const Surrogate s = ratio_surrogate(ratio, group.advantages[i], cfg.clip_ratio);
    obj += w.mu1 * s.value - w.mu2 * kl;

    kl_sum += kl;
    mu1_sum += w.mu1;
    mu2_sum += w.mu2;
    ratio_sum += ratio;
  }
  out.objective = obj * inv_g;
  out.mean_kl = kl_sum * inv_g;
  out.mean_mu1 = mu1_sum * inv_g;
  out.mean_mu2 = mu2_sum * inv_g;
  out.mean_ratio = ratio_sum * inv_g;
  return out;
}

double grpo_objective(const TrajectoryGroup& group, const policy::PolicyParams& params,
                      const policy::PolicyParams& ref_params, const OptimConfig& cfg) {
  return eval_group(group, params, ref_params, cfg, ObjectiveKind::Grpo).objective;
}

double apgrpo_objective(const TrajectoryGroup& group, const policy::PolicyParams& params,
                        const policy::PolicyParams& ref_params, const OptimConfig& cfg) {
  return eval_group(group, params, ref_params, cfg, ObjectiveKind::Apgrpo).objective;
}

std::vector<double> objective_gradient(ObjectiveKind kind, const TrajectoryGroup& group,
                                       const policy::PolicyParams& params,
                                       const policy::PolicyParams& ref_params,
                                       const OptimConfig& cfg) {
  if (kind == ObjectiveKind::Sft) {
    throw std::invalid_argument("sft gradient takes a dataset; use sft_gradient");
  }
  check_group(group);

  std::vector<double> grad(params.dims().total(), 0.0);
  const double inv_g = 1.0 / static_cast<double>(group.size());
  for (int i = 0; i < group.size(); ++i) {
    const env::Trajectory& traj = group.trajectories[i];
    const auto roi_dist = policy::action_dist(params, policy::Head::Roi, traj.turn1_features);
    const auto ans_dist = policy::action_dist(params, policy::Head::Answer, traj.turn2_features);
    const double lp_new =
        roi_dist.log_probs[traj.roi_action] + ans_dist.log_probs[traj.answer_action];
    const double ratio = std::exp(lp_new - traj.logprob_old);

    const ApWeights w = weights_for(kind, group.rewards[i], group.reward_mean, cfg);
    const Surrogate s = ratio_surrogate(ratio, group.advantages[i], cfg.clip_ratio);
    if (s.pass_through) {
      const double coeff = inv_g * w.mu1 * group.advantages[i] * ratio;
      if (coeff != 0.0) {
        policy::accumulate_grad_log_prob(params, policy::Head::Roi, traj.turn1_features, roi_dist,
                                         traj.roi_action, coeff, grad);
        policy::accumulate_grad_log_prob(params, policy::Head::Answer, traj.turn2_features,
                                         ans_dist, traj.answer_action, coeff, grad);
      }
    }

    if (w.mu2 != 0.0) {
      const auto roi_ref = policy::action_dist(ref_params, policy::Head::Roi, traj.turn1_features);
      const auto ans_ref =
          policy::action_dist(ref_params, policy::Head::Answer, traj.turn2_features);
      const double kl_coeff = -inv_g * w.mu2;
      policy::accumulate_kl_gradient(params, policy::Head::Roi, traj.turn1_features, roi_dist,
                                     roi_ref, kl_coeff, grad);
      policy::accumulate_kl_gradient(params, policy::Head::Answer, traj.turn2_features, ans_dist,
                                     ans_ref, kl_coeff, grad);
    }
  }
  return grad;
}

double sft_loss(const policy::PolicyParams& params, std::span<const SftExample> dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  double loss = 0.0;
  for (const SftExample& ex : dataset) {
    loss -= policy::log_prob(params, policy::Head::Answer, ex.features, ex.target);
  }
  return loss / static_cast<double>(dataset.size());
}

std::vector<double> sft_gradient(const policy::PolicyParams& params,
                                 std::span<const SftExample> dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  std::vector<double> grad(params.dims().total(), 0.0);
  const double coeff = -1.0 / static_cast<double>(dataset.size());
  for (const SftExample& ex : dataset) {
    const auto dist = policy::action_dist(params, policy::Head::Answer, ex.features);
    if (ex.target < 0 || ex.target >= dist.size()) {
      throw std::invalid_argument("sft target out of range");
    }
    policy::accumulate_grad_log_prob(params, policy::Head::Answer, ex.features, dist, ex.target,
                                     coeff, grad);
  }
  return grad;
}

policy::PolicyParams sgd_step(const policy::PolicyParams& params, std::span<const double> grad,
                              double lr, StepDirection direction) {
  if (grad.size() != params.dims().total()) {
    throw std::invalid_argument("gradient shape does not match params");
  }
  policy::PolicyParams next = params;
  const double sign = direction == StepDirection::Ascent ? 1.0 : -1.0;
  auto values = next.flat();
  for (std::size_t j = 0; j < values.size(); ++j) values[j] += sign * lr * grad[j];
  return next;
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> at, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be > 0");
  std::vector<double> x(at.begin(), at.end());
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + h;
    const double fp = f(x);
    x[j] = saved - h;
    const double fm = f(x);
    x[j] = saved;
    grad[j] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace hartlab::optim
