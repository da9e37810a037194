#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hartlab/rng.hpp"

namespace hartlab::policy {

enum class Head { Roi, Answer };

struct PolicyDims {
  int roi_actions = 0;
  int roi_features = 0;
  int answers = 0;
  int answer_features = 0;

  std::size_t roi_size() const {
    return static_cast<std::size_t>(roi_actions) * static_cast<std::size_t>(roi_features);
  }
  std::size_t answer_size() const {
    return static_cast<std::size_t>(answers) * static_cast<std::size_t>(answer_features);
  }
  std::size_t total() const { return roi_size() + answer_size(); }

  bool operator==(const PolicyDims&) const = default;
};

// Two linear-softmax heads (ROI selection, answer selection) over a single
// flat parameter vector. Immutable in spirit: updates produce new values,
// so concurrent readers never race with a writer.
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(PolicyDims dims);  // zero-initialized (uniform policy)

  static PolicyParams random(PolicyDims dims, rng::Xoshiro256pp& gen, double scale);

  const PolicyDims& dims() const { return dims_; }
  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }

  std::size_t head_offset(Head head) const {
    return head == Head::Roi ? 0 : dims_.roi_size();
  }
  int head_actions(Head head) const {
    return head == Head::Roi ? dims_.roi_actions : dims_.answers;
  }
  int head_features(Head head) const {
    return head == Head::Roi ? dims_.roi_features : dims_.answer_features;
  }

  double weight(Head head, int action, int feature) const {
    return values_[index(head, action, feature)];
  }
  double& weight(Head head, int action, int feature) {
    return values_[index(head, action, feature)];
  }

  bool all_finite() const;

 private:
  std::size_t index(Head head, int action, int feature) const;

  PolicyDims dims_{};
  std::vector<double> values_;
};

// Softmax output of one head. probs are strictly positive and sum to 1;
// log_probs are the cached logarithms (always finite).
struct ActionDistribution {
  std::vector<double> probs;
  std::vector<double> log_probs;

  int size() const { return static_cast<int>(probs.size()); }
};

// softmax(W x) with max subtraction, so any finite logits are safe.
ActionDistribution action_dist(const PolicyParams& params, Head head,
                               std::span<const double> features);

double log_prob(const PolicyParams& params, Head head, std::span<const double> features,
                int action);

// Analytic d/dW log pi(action | features) as a full flat vector:
// (onehot(action) - probs) outer features in the chosen head's block, zeros
// in the other head's block.
std::vector<double> grad_log_prob(const PolicyParams& params, Head head,
                                  std::span<const double> features, int action);

// Fused accumulate: acc += coeff * grad_log_prob(...). `dist` must be the
// distribution of `params` at `features`. Used by the objective gradients
// to avoid materializing per-trajectory vectors.
void accumulate_grad_log_prob(const PolicyParams& params, Head head,
                              std::span<const double> features, const ActionDistribution& dist,
                              int action, double coeff, std::span<double> acc);

// Exact KL(p || q) over the discrete action set. Not symmetric.
double kl_exact(const ActionDistribution& p, const ActionDistribution& q);

// acc += coeff * d/dW KL(pi_params(.|features) || q). `p` must be the
// distribution of `params` at `features`; `q` is the reference distribution
// at the same decision point.
void accumulate_kl_gradient(const PolicyParams& params, Head head,
                            std::span<const double> features, const ActionDistribution& p,
                            const ActionDistribution& q, double coeff, std::span<double> acc);

// Inverse-CDF sampling over cumulative probs; ties break to the lowest
// index. Deterministic given the generator state.
int sample_action(const ActionDistribution& dist, rng::Xoshiro256pp& gen);

// Checkpoint IO: flat JSON object with dims, row-major weights and a format
// version. Throws hartlab::report::IoError on IO problems and
// std::invalid_argument on malformed content.
void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace hartlab::policy
