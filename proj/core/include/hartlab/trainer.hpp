#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hartlab/env.hpp"
#include "hartlab/optim.hpp"
#include "hartlab/policy.hpp"
#include "hartlab/stats.hpp"

namespace hartlab::trainer {

enum class Method { Grpo, Apgrpo };

// Instance-index bases for the three dataset roles. RL consumes indices
// [rl_base, rl_base + steps), SFT [sft_base, sft_base + n_examples),
// evaluation [eval_base, eval_base + episodes). Keeping them in disjoint
// ranges is the dataset-separation contract; train_sft enforces it.
struct InstanceRanges {
  std::uint64_t rl_base = 0;
  std::uint64_t sft_base = std::uint64_t{1} << 32;
  std::uint64_t eval_base = std::uint64_t{1} << 33;
};

struct StepMetrics {
  int step = 0;
  double objective = 0.0;
  double answer_acc = 0.0;     // group mean reward
  double grounding_acc = 0.0;  // group mean L
  double mean_kl = 0.0;
  double mean_mu1 = 1.0;
  double mean_mu2 = 0.0;
};

struct TrainHistory {
  std::vector<StepMetrics> steps;
};

struct EvalReport {
  double answer_accuracy = 0.0;
  double grounding_accuracy = 0.0;
  stats::JointStats joint;
  double mi_nats = 0.0;
  std::uint64_t episodes = 0;
};

// G episodes on one instance with per-member derived rng streams and
// group-relative advantages attached. group_key makes member streams unique
// per training step.
optim::TrajectoryGroup rollout_group(const policy::PolicyParams& params,
                                     const env::Instance& inst, const env::EnvConfig& cfg,
                                     int group_size, std::uint64_t group_key, double eps_std);

struct RlResult {
  policy::PolicyParams params;
  TrainHistory history;
};

// Stage-1 RL: per step, draw an instance, roll out a group under the
// current policy, take `inner_epochs` ascent steps on the chosen objective.
// The reference policy is the snapshot at entry. `init` defaults to the
// zero (uniform) policy.
RlResult train_rl(const env::EnvConfig& env_cfg, const optim::OptimConfig& optim_cfg,
                  Method method, std::optional<policy::PolicyParams> init = std::nullopt,
                  const InstanceRanges& ranges = {});

struct SftConfig {
  int n_examples = 512;
  double lr = 0.2;
  int steps = 2000;
};

// Stage-2 SFT: full-batch gradient descent on the answer-head NLL over
// full observations. `rl_indices_used` is the count of RL instance indices
// already consumed; overlapping RL/SFT index ranges throw
// std::invalid_argument("dataset separation violated").
policy::PolicyParams train_sft(const policy::PolicyParams& init, const env::EnvConfig& env_cfg,
                               const SftConfig& sft_cfg, const InstanceRanges& ranges,
                               std::uint64_t rl_indices_used);

// Fraction of fresh full-observation instances whose greedy (argmax) answer
// is correct; the SFT-phase quality measure.
double sft_answer_accuracy(const policy::PolicyParams& params, const env::EnvConfig& cfg,
                           std::uint64_t n_instances, std::uint64_t instance_base);

// Closed-loop evaluation on a fresh index range: joint (L, R) counts,
// accuracies and plug-in mutual information.
EvalReport evaluate(const policy::PolicyParams& params, const env::EnvConfig& cfg,
                    std::uint64_t n_episodes, std::uint64_t eval_base = std::uint64_t{1} << 33,
                    int threads = 1);

struct Prop1Seed {
  std::uint64_t seed = 0;
  double mi_hart = 0.0;
  double mi_baseline = 0.0;
  double diff = 0.0;
};

struct Prop1Report {
  std::vector<Prop1Seed> per_seed;
  double median_diff = 0.0;
  double frac_hart_greater = 0.0;
  std::uint64_t episodes_per_mode = 0;
};

// Evaluates one policy under both modes across n_seeds derived seeds and
// compares the mutual information between grounding and answer
// correctness. The two configs must differ only in mode.
Prop1Report prop1_diagnostic(const env::EnvConfig& hart_cfg, const env::EnvConfig& baseline_cfg,
                             const policy::PolicyParams& params, std::uint64_t episodes,
                             int n_seeds, int threads = 1);

// One-shot ROI environment: a single decision over num_actions with a
// binary reward channel given directly as P(r=1 | grounded) and
// P(r=1 | not grounded). Used by the exact-gradient diagnostics, where the
// population gradient can be enumerated outcome by outcome.
struct SingleStepEnvSpec {
  int num_actions = 4;
  int correct_action = 0;
  std::vector<double> features;
  double p_reward_given_correct = 0.9;    // P(r=1 | L=1)
  double p_reward_given_incorrect = 0.3;  // P(r=1 | L=0)

  void validate() const;
};

// Population gradient of the chosen objective in the infinite-group limit
// (advantages centered by the population mean reward and normalized by the
// population std), computed by exact summation over all (action, reward)
// outcomes. beta is forced to 0 here: the diagnostic isolates the
// reward-weighting term. Throws if the outcome enumeration exceeds 1e6.
std::vector<double> exact_expected_gradient(const policy::PolicyParams& params,
                                            const SingleStepEnvSpec& env_spec,
                                            optim::ObjectiveKind kind,
                                            const optim::OptimConfig& cfg);

struct McGradient {
  std::vector<double> mean;
  std::vector<double> variance;  // per-coordinate variance of group-level samples
  std::uint64_t groups = 0;
};

// Monte-Carlo oracle for exact_expected_gradient: sample n_groups groups of
// cfg.group_size outcomes and average the same population-normalized
// per-member terms.
McGradient mc_expected_gradient(const policy::PolicyParams& params,
                                const SingleStepEnvSpec& env_spec, optim::ObjectiveKind kind,
                                const optim::OptimConfig& cfg, std::uint64_t n_groups,
                                std::uint64_t seed);

struct DecompositionFit {
  double alpha = 0.0;
  double residual = 0.0;  // ||d - alpha v|| / max(||d||, tiny)
  double d_dot_v = 0.0;
  double d_norm = 0.0;
  double v_norm = 0.0;
  bool alpha_in_unit = false;
  bool vacuous = false;     // both d and v vanish
  bool degenerate = false;  // v vanishes while d does not
};

// Least-squares fit of d = alpha v; the machinery behind the gradient
// decomposition report.
DecompositionFit fit_decomposition(std::span<const double> d, std::span<const double> v);

struct Prop2Report {
  // grpo and apgrpo on the hart channel
  DecompositionFit same_channel;
  // grpo on the baseline channel vs apgrpo on the hart channel
  DecompositionFit cross_channel;
  double p01_hart = 0.0;      // P(L=0, r=1) on the hart channel
  double p01_baseline = 0.0;  // P(L=0, r=1) on the baseline channel
  std::vector<double> direction_cross;  // v of the cross-channel reading
};

// Measures the decomposition g_apgrpo = g_baseline - alpha * P(L=0,r=1) *
// E_{L=0,r=1}[grad log pi] with exact population gradients, under both
// readings of "baseline". Reports alpha, the relative residual and the
// degenerate/vacuous flags; asserts nothing.
Prop2Report prop2_diagnostic(const policy::PolicyParams& params, const SingleStepEnvSpec& hart,
                             const SingleStepEnvSpec& baseline, const optim::OptimConfig& cfg);

}  // namespace hartlab::trainer
