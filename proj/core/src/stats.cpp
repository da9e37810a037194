#include "hartlab/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace hartlab::stats {

double misgrounded_given_correct(const JointStats& s) {
  const std::uint64_t correct = s.n01 + s.n11;
  if (correct == 0) throw std::invalid_argument("undefined conditional");
  return static_cast<double>(s.n01) / static_cast<double>(correct);
}

double mutual_information(const JointStats& s, double smoothing) {
  if (s.total() == 0) throw std::invalid_argument("empty joint statistics");
  if (smoothing < 0.0) throw std::invalid_argument("smoothing must be >= 0");

  const double cells[2][2] = {
      {static_cast<double>(s.n00) + smoothing, static_cast<double>(s.n01) + smoothing},
      {static_cast<double>(s.n10) + smoothing, static_cast<double>(s.n11) + smoothing},
  };
  const double n = cells[0][0] + cells[0][1] + cells[1][0] + cells[1][1];

  double pl[2] = {0.0, 0.0};
  double pr[2] = {0.0, 0.0};
  for (int l = 0; l < 2; ++l) {
    for (int r = 0; r < 2; ++r) {
      const double p = cells[l][r] / n;
      pl[l] += p;
      pr[r] += p;
    }
  }

  double mi = 0.0;
  for (int l = 0; l < 2; ++l) {
    for (int r = 0; r < 2; ++r) {
      const double p = cells[l][r] / n;
      if (p > 0.0) mi += p * std::log(p / (pl[l] * pr[r]));
    }
  }
  return mi;
}

double entropy(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument("not a distribution");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("not a distribution");

  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace hartlab::stats
