#pragma once

#include <cstdint>
#include <span>

namespace hartlab::stats {

// 2x2 contingency counts over (grounding correct L, answer correct R).
// n<L><R>, e.g. n01 counts episodes with incorrect grounding and a correct
// answer — the reward-misspecification cell.
struct JointStats {
  std::uint64_t n11 = 0;
  std::uint64_t n01 = 0;
  std::uint64_t n10 = 0;
  std::uint64_t n00 = 0;

  std::uint64_t total() const { return n11 + n01 + n10 + n00; }

  JointStats transposed() const { return JointStats{n11, n10, n01, n00}; }

  bool operator==(const JointStats&) const = default;
};

// P(L = 0 | R = 1): the proportion of correct answers whose grounding was
// wrong. Throws std::invalid_argument("undefined conditional") when there
// are no correct answers.
double misgrounded_given_correct(const JointStats& s);

// Plug-in mutual information I(L;R) in nats, with the 0*ln(0/q) = 0
// convention and no smoothing by default. `smoothing` adds the given mass
// to every cell before normalizing (useful for CI bands, never default).
double mutual_information(const JointStats& s, double smoothing = 0.0);

// Shannon entropy of a probability vector, in nats. Components must be
// nonnegative and sum to 1 within 1e-9, else throws
// std::invalid_argument("not a distribution").
double entropy(std::span<const double> p);

inline double nats_to_bits(double nats) { return nats / 0.6931471805599453; }

}  // namespace hartlab::stats
