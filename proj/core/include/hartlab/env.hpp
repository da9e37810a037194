#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "hartlab/policy.hpp"
#include "hartlab/rng.hpp"

namespace hartlab::env {

// Hart: turn 2 sees only the selected cell's contents (the full grid is
// withheld), so a correct answer certifies grounding up to chance.
// Baseline: turn 2 additionally receives the true answer symbol with
// probability leak_prob, regardless of where the ROI landed — the channel
// that rewards correct answers with incorrect grounding.
enum class Mode { Hart, Baseline };

struct EnvConfig {
  int grid_g = 4;           // grid is grid_g x grid_g cells
  int num_answers = 4;      // answer alphabet size M
  double cue_noise = 0.2;   // probability the cue flags a wrong cell
  double leak_prob = 0.0;   // baseline-mode leak probability
  Mode mode = Mode::Hart;
  std::uint64_t seed = 0;

  int cells() const { return grid_g * grid_g; }
  // answer symbols plus one null symbol carried by distractor cells; the
  // disjoint null makes the chance rate exactly 1/M under wrong grounding
  int symbol_alphabet() const { return num_answers + 1; }
  int null_symbol() const { return num_answers; }

  void validate() const;  // throws std::invalid_argument with the field name
};

// Answer-head feature layout, shared by cropped views and full views:
//   [cells x symbol one-hot blocks][cue one-hot]
// A cropped view fills only the observed cell's block; a full view fills
// every block plus the cue. Turn-1 features are the cue one-hot alone.
policy::PolicyDims dims_for(const EnvConfig& cfg);

struct Instance {
  int evidence_cell = 0;               // the one cell whose contents determine the answer
  int answer = 0;                      // index in [0, num_answers)
  int cue_cell = 0;                    // cell flagged by the lossy downsampled cue
  std::vector<int> cell_contents;      // per-cell symbol; distractors carry the null symbol
};

struct Trajectory {
  int roi_action = -1;
  int answer_action = -1;
  bool grounded = false;   // L: roi_action == evidence_cell
  bool rewarded = false;   // r: answer_action == answer
  double logprob_old = std::numeric_limits<double>::quiet_NaN();  // under the acting policy
  std::vector<double> turn1_features;
  std::vector<double> turn2_features;

  bool has_old_logprob() const { return logprob_old == logprob_old; }
};

// Draw order: evidence cell, answer, cue flip, wrong-cell index (only when
// the flip lands on "wrong"). Each instance owns its derived stream, so the
// branch-dependent draw count never leaks across instances.
Instance gen_instance(const EnvConfig& cfg, rng::Xoshiro256pp& gen);

// Turn-1 observation: the cue encoding only, never cell contents.
std::vector<double> observe_turn1(const Instance& inst, const EnvConfig& cfg);

// Turn-2 observation for the chosen ROI. Consumes one uniform draw for the
// leak decision in baseline mode with leak_prob > 0; none otherwise, so a
// zero-leak baseline is draw-for-draw identical to hart mode.
std::vector<double> observe_turn2(const Instance& inst, int roi, const EnvConfig& cfg,
                                  rng::Xoshiro256pp& gen);

// Unwithheld view: all cell contents plus the cue (the SFT regime).
std::vector<double> observe_full(const Instance& inst, const EnvConfig& cfg);

// Two-turn episode: sample ROI from the cue, then the answer from the
// (mode-dependent) turn-2 view. Records L, r and the summed log-probability
// under the acting policy.
Trajectory rollout_episode(const policy::PolicyParams& params, const Instance& inst,
                           const EnvConfig& cfg, rng::Xoshiro256pp& gen);

// Cue-following ROI head (logit margin roi_margin on the flagged cell) plus
// a symbol-reading answer head (logit margin answer_margin on any observed
// answer symbol, in any cell block). roi_margin = 0 leaves the ROI head
// uniform. The answer head reads leaked symbols too, which is exactly what
// makes it exploit the baseline mode.
policy::PolicyParams make_oracle_policy(const EnvConfig& cfg, double roi_margin,
                                        double answer_margin);

// Stream labels for seed derivation (see rng::stream). Every instance draw
// uses the kStreamInstance family addressed by a global instance index, so
// disjoint index ranges mean disjoint datasets (the RL/SFT/eval separation
// contract). Rollout draws live in their own families.
inline constexpr std::uint64_t kStreamInstance = 1;
inline constexpr std::uint64_t kStreamRollout = 2;
inline constexpr std::uint64_t kStreamEvalRollout = 4;

}  // namespace hartlab::env
