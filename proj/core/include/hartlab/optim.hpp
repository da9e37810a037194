#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hartlab/env.hpp"
#include "hartlab/policy.hpp"

namespace hartlab::optim {

struct OptimConfig {
  int group_size = 8;      // G
  double beta = 0.04;      // KL penalty coefficient
  double k = 0.6;          // advantage-preference scaling factor, in [0,1]
  double lr = 0.05;
  double eps_std = 1e-8;   // zero-variance guard for the advantage denominator
  int steps = 2000;
  double clip_ratio = 0.0;  // optional PPO-style ratio clip; 0 disables (extension, default off)
  int inner_epochs = 1;     // gradient steps per rollout group

  void validate() const;  // throws std::invalid_argument with the field name
};

// Group of G binary rewards. Entries must be exactly 0 or 1, G >= 2.
struct RewardGroup {
  std::vector<double> rewards;

  void validate() const;
};

// Group-relative advantages: (r_i - mean) / max(pop_std, eps_std), with the
// all-equal case mapped to exactly zero (no eps blowup).
std::vector<double> group_advantages(std::span<const double> rewards, double eps_std);

struct ApWeights {
  double mu1 = 1.0;  // scales the importance-weighted advantage term
  double mu2 = 0.0;  // reward-dependent KL coefficient
};

// mu1 = 1 + k (r - mean), mu2 = beta (1 - k (r - mean)). With k in [0,1]
// and binary rewards both stay nonnegative; k = 0 recovers the plain
// (1, beta) weighting.
ApWeights apgrpo_weights(double reward, double reward_mean, const OptimConfig& cfg);

// G sampled episodes on one instance, with rewards and group-relative
// advantages attached. Old-policy log-probs live inside the trajectories.
struct TrajectoryGroup {
  std::vector<env::Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
  double reward_mean = 0.0;

  int size() const { return static_cast<int>(trajectories.size()); }
};

enum class ObjectiveKind { Grpo, Apgrpo, Sft };

// Per-group scalar diagnostics that fall out of an objective evaluation.
struct GroupEval {
  double objective = 0.0;
  double mean_kl = 0.0;
  double mean_mu1 = 1.0;
  double mean_mu2 = 0.0;
  double mean_ratio = 1.0;
};

// Shared evaluator for the group objectives. Grpo is the kind with fixed
// weights (1, beta); Apgrpo applies the reward-dependent weights. Both run
// the identical code path in the identical order, so apgrpo at k = 0 is
// bitwise equal to grpo. KL is the exact categorical KL against
// `ref_params`, summed over the two visited decision points.
GroupEval eval_group(const TrajectoryGroup& group, const policy::PolicyParams& params,
                     const policy::PolicyParams& ref_params, const OptimConfig& cfg,
                     ObjectiveKind kind);

double grpo_objective(const TrajectoryGroup& group, const policy::PolicyParams& params,
                      const policy::PolicyParams& ref_params, const OptimConfig& cfg);

double apgrpo_objective(const TrajectoryGroup& group, const policy::PolicyParams& params,
                        const policy::PolicyParams& ref_params, const OptimConfig& cfg);

// Analytic gradient of the chosen group objective w.r.t. the flat policy
// parameters. kind must be Grpo or Apgrpo.
std::vector<double> objective_gradient(ObjectiveKind kind, const TrajectoryGroup& group,
                                       const policy::PolicyParams& params,
                                       const policy::PolicyParams& ref_params,
                                       const OptimConfig& cfg);

struct SftExample {
  std::vector<double> features;  // full-observation features
  int target = 0;                // answer index
};

// Mean negative log-likelihood of the targets under the answer head.
double sft_loss(const policy::PolicyParams& params, std::span<const SftExample> dataset);

// Analytic gradient of sft_loss.
std::vector<double> sft_gradient(const policy::PolicyParams& params,
                                 std::span<const SftExample> dataset);

enum class StepDirection { Ascent, Descent };

policy::PolicyParams sgd_step(const policy::PolicyParams& params, std::span<const double> grad,
                              double lr, StepDirection direction);

// Central differences (f(x + h e_j) - f(x - h e_j)) / (2h) per coordinate.
// The verification oracle for every analytic gradient in this project;
// keep it independent of the code paths it checks.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> at, double h);

}  // namespace hartlab::optim
