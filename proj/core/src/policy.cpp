#include "hartlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hartlab/report.hpp"

namespace hartlab::policy {

namespace {

void check_dims(const PolicyDims& dims) {
  if (dims.roi_actions < 1 || dims.roi_features < 1 || dims.answers < 1 ||
      dims.answer_features < 1) {
    throw std::invalid_argument("policy dims must be positive");
  }
}

}  // namespace

PolicyParams::PolicyParams(PolicyDims dims) : dims_(dims), values_(dims.total(), 0.0) {
  check_dims(dims);
}

PolicyParams PolicyParams::random(PolicyDims dims, rng::Xoshiro256pp& gen, double scale) {
  PolicyParams p(dims);
  for (double& v : p.values_) {
    // sum of two uniforms, centered; bounded support keeps logits tame
    v = scale * (gen.next_double() + gen.next_double() - 1.0);
  }
  return p;
}

std::size_t PolicyParams::index(Head head, int action, int feature) const {
  return head_offset(head) + static_cast<std::size_t>(action) * head_features(head) +
         static_cast<std::size_t>(feature);
}

bool PolicyParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ActionDistribution action_dist(const PolicyParams& params, Head head,
                               std::span<const double> features) {
  const int actions = params.head_actions(head);
  const int nfeat = params.head_features(head);
  if (static_cast<int>(features.size()) != nfeat) {
    throw std::invalid_argument("feature dimension mismatch");
  }

  ActionDistribution dist;
  dist.log_probs.resize(actions);
  const double* w = params.flat().data() + params.head_offset(head);
  for (int a = 0; a < actions; ++a) {
    double logit = 0.0;
    const double* row = w + static_cast<std::size_t>(a) * nfeat;
    for (int j = 0; j < nfeat; ++j) logit += row[j] * features[j];
    dist.log_probs[a] = logit;
  }

  const double max_logit = *std::max_element(dist.log_probs.begin(), dist.log_probs.end());
  double sum = 0.0;
  for (double l : dist.log_probs) sum += std::exp(l - max_logit);
  const double log_norm = max_logit + std::log(sum);

  dist.probs.resize(actions);
  for (int a = 0; a < actions; ++a) {
    dist.log_probs[a] -= log_norm;
    dist.probs[a] = std::exp(dist.log_probs[a]);
  }
  return dist;
}

double log_prob(const PolicyParams& params, Head head, std::span<const double> features,
                int action) {
  const ActionDistribution dist = action_dist(params, head, features);
  if (action < 0 || action >= dist.size()) throw std::invalid_argument("action out of range");
  return dist.log_probs[action];
}

std::vector<double> grad_log_prob(const PolicyParams& params, Head head,
                                  std::span<const double> features, int action) {
  const ActionDistribution dist = action_dist(params, head, features);
  if (action < 0 || action >= dist.size()) throw std::invalid_argument("action out of range");
  std::vector<double> grad(params.dims().total(), 0.0);
  accumulate_grad_log_prob(params, head, features, dist, action, 1.0, grad);
  return grad;
}

void accumulate_grad_log_prob(const PolicyParams& params, Head head,
                              std::span<const double> features, const ActionDistribution& dist,
                              int action, double coeff, std::span<double> acc) {
  const int actions = params.head_actions(head);
  const int nfeat = params.head_features(head);
  double* block = acc.data() + params.head_offset(head);
  for (int a = 0; a < actions; ++a) {
    const double c = coeff * ((a == action ? 1.0 : 0.0) - dist.probs[a]);
    if (c == 0.0) continue;
    double* row = block + static_cast<std::size_t>(a) * nfeat;
    for (int j = 0; j < nfeat; ++j) row[j] += c * features[j];
  }
}

double kl_exact(const ActionDistribution& p, const ActionDistribution& q) {
  if (p.size() != q.size()) throw std::invalid_argument("distribution dimension mismatch");
  double kl = 0.0;
  for (int a = 0; a < p.size(); ++a) {
    kl += p.probs[a] * (p.log_probs[a] - q.log_probs[a]);
  }
  return kl;
}

void accumulate_kl_gradient(const PolicyParams& params, Head head,
                            std::span<const double> features, const ActionDistribution& p,
                            const ActionDistribution& q, double coeff, std::span<double> acc) {
  if (p.size() != q.size()) throw std::invalid_argument("distribution dimension mismatch");
  const int actions = params.head_actions(head);
  const int nfeat = params.head_features(head);

  // d/dW sum_a p_a (lp_a - lq_a) = sum_a c_a (onehot_a - p) ⊗ x
  // with c_a = p_a (lp_a - lq_a); collapses to (c - (sum c) p) ⊗ x.
  double kl = 0.0;
  std::vector<double> c(actions);
  for (int a = 0; a < actions; ++a) {
    c[a] = p.probs[a] * (p.log_probs[a] - q.log_probs[a]);
    kl += c[a];
  }

  double* block = acc.data() + params.head_offset(head);
  for (int a = 0; a < actions; ++a) {
    const double row_coeff = coeff * (c[a] - kl * p.probs[a]);
    if (row_coeff == 0.0) continue;
    double* row = block + static_cast<std::size_t>(a) * nfeat;
    for (int j = 0; j < nfeat; ++j) row[j] += row_coeff * features[j];
  }
}

int sample_action(const ActionDistribution& dist, rng::Xoshiro256pp& gen) {
  const double u = gen.next_double();
  double acc = 0.0;
  for (int a = 0; a < dist.size(); ++a) {
    acc += dist.probs[a];
    if (u < acc) return a;
  }
  return dist.size() - 1;
}

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["dims"] = {{"roi_actions", params.dims().roi_actions},
               {"roi_features", params.dims().roi_features},
               {"answers", params.dims().answers},
               {"answer_features", params.dims().answer_features}};
  const auto flat = params.flat();
  j["roi_weights"] = std::vector<double>(flat.begin(), flat.begin() + params.dims().roi_size());
  j["ans_weights"] = std::vector<double>(flat.begin() + params.dims().roi_size(), flat.end());
  report::write_text_file(path, j.dump(2) + "\n");
}

PolicyParams load_checkpoint(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(report::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw std::invalid_argument("unsupported checkpoint format version");
    }
    PolicyDims dims{j.at("dims").at("roi_actions").get<int>(),
                    j.at("dims").at("roi_features").get<int>(),
                    j.at("dims").at("answers").get<int>(),
                    j.at("dims").at("answer_features").get<int>()};
    PolicyParams params(dims);
    const auto roi = j.at("roi_weights").get<std::vector<double>>();
    const auto ans = j.at("ans_weights").get<std::vector<double>>();
    if (roi.size() != dims.roi_size() || ans.size() != dims.answer_size()) {
      throw std::invalid_argument("checkpoint weight sizes do not match dims");
    }
    std::copy(roi.begin(), roi.end(), params.flat().begin());
    std::copy(ans.begin(), ans.end(), params.flat().begin() + dims.roi_size());
    if (!params.all_finite()) throw std::invalid_argument("checkpoint contains non-finite weights");
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed checkpoint " + path + ": " + e.what());
  }
}

}  // namespace hartlab::policy
