#include "hartlab/env.hpp"

#include <stdexcept>
#include <string>

namespace hartlab::env {

void EnvConfig::validate() const {
  if (grid_g < 2) throw std::invalid_argument("env.grid must be >= 2");
  if (num_answers < 2) throw std::invalid_argument("env.answers must be >= 2");
  if (!(cue_noise >= 0.0 && cue_noise <= 1.0)) {
    throw std::invalid_argument("env.cue_noise must be in [0,1]");
  }
  if (!(leak_prob >= 0.0 && leak_prob <= 1.0)) {
    throw std::invalid_argument("env.leak_prob must be in [0,1]");
  }
}

policy::PolicyDims dims_for(const EnvConfig& cfg) {
  cfg.validate();
  policy::PolicyDims dims;
  dims.roi_actions = cfg.cells();
  dims.roi_features = cfg.cells();
  dims.answers = cfg.num_answers;
  dims.answer_features = cfg.cells() * cfg.symbol_alphabet() + cfg.cells();
  return dims;
}

Instance gen_instance(const EnvConfig& cfg, rng::Xoshiro256pp& gen) {
  Instance inst;
  const int cells = cfg.cells();
  inst.evidence_cell = static_cast<int>(gen.next_below(static_cast<std::uint64_t>(cells)));
  inst.answer = static_cast<int>(gen.next_below(static_cast<std::uint64_t>(cfg.num_answers)));

  const double flip = gen.next_double();
  if (flip < cfg.cue_noise) {
    // flag a uniformly chosen wrong cell
    const int off = static_cast<int>(gen.next_below(static_cast<std::uint64_t>(cells - 1)));
    inst.cue_cell = off >= inst.evidence_cell ? off + 1 : off;
  } else {
    inst.cue_cell = inst.evidence_cell;
  }

  inst.cell_contents.assign(cells, cfg.null_symbol());
  inst.cell_contents[inst.evidence_cell] = inst.answer;
  return inst;
}

std::vector<double> observe_turn1(const Instance& inst, const EnvConfig& cfg) {
  std::vector<double> features(cfg.cells(), 0.0);
  features[inst.cue_cell] = 1.0;
  return features;
}

namespace {

inline std::size_t symbol_slot(const EnvConfig& cfg, int cell, int symbol) {
  return static_cast<std::size_t>(cell) * cfg.symbol_alphabet() + symbol;
}

}  // namespace

std::vector<double> observe_turn2(const Instance& inst, int roi, const EnvConfig& cfg,
                                  rng::Xoshiro256pp& gen) {
  if (roi < 0 || roi >= cfg.cells()) throw std::invalid_argument("roi out of range");
  const std::size_t dim = static_cast<std::size_t>(cfg.cells()) * cfg.symbol_alphabet() +
                          static_cast<std::size_t>(cfg.cells());
  std::vector<double> features(dim, 0.0);
  features[symbol_slot(cfg, roi, inst.cell_contents[roi])] = 1.0;
  if (cfg.mode == Mode::Baseline && cfg.leak_prob > 0.0) {
    if (gen.next_double() < cfg.leak_prob) {
      // the leak surfaces the answer symbol regardless of the chosen ROI
      features[symbol_slot(cfg, inst.evidence_cell, inst.answer)] = 1.0;
    }
  }
  return features;
}

std::vector<double> observe_full(const Instance& inst, const EnvConfig& cfg) {
  const std::size_t cue_offset =
      static_cast<std::size_t>(cfg.cells()) * cfg.symbol_alphabet();
  std::vector<double> features(cue_offset + cfg.cells(), 0.0);
  for (int c = 0; c < cfg.cells(); ++c) {
    features[symbol_slot(cfg, c, inst.cell_contents[c])] = 1.0;
  }
  features[cue_offset + inst.cue_cell] = 1.0;
  return features;
}

Trajectory rollout_episode(const policy::PolicyParams& params, const Instance& inst,
                           const EnvConfig& cfg, rng::Xoshiro256pp& gen) {
  if (params.dims() != dims_for(cfg)) {
    throw std::invalid_argument("policy dims do not match env config");
  }

  Trajectory traj;
  traj.turn1_features = observe_turn1(inst, cfg);
  const auto roi_dist = policy::action_dist(params, policy::Head::Roi, traj.turn1_features);
  traj.roi_action = policy::sample_action(roi_dist, gen);

  traj.turn2_features = observe_turn2(inst, traj.roi_action, cfg, gen);
  const auto ans_dist = policy::action_dist(params, policy::Head::Answer, traj.turn2_features);
  traj.answer_action = policy::sample_action(ans_dist, gen);

  traj.grounded = traj.roi_action == inst.evidence_cell;
  traj.rewarded = traj.answer_action == inst.answer;
  traj.logprob_old = roi_dist.log_probs[traj.roi_action] + ans_dist.log_probs[traj.answer_action];
  return traj;
}

policy::PolicyParams make_oracle_policy(const EnvConfig& cfg, double roi_margin,
                                        double answer_margin) {
  policy::PolicyParams params(dims_for(cfg));
  for (int c = 0; c < cfg.cells(); ++c) {
    params.weight(policy::Head::Roi, c, c) = roi_margin;
  }
  for (int a = 0; a < cfg.num_answers; ++a) {
    for (int c = 0; c < cfg.cells(); ++c) {
      params.weight(policy::Head::Answer, a, static_cast<int>(symbol_slot(cfg, c, a))) =
          answer_margin;
    }
  }
  return params;
}

}  // namespace hartlab::env
