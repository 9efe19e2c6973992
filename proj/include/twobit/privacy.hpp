#pragma once

#include <array>
#include <cstdint>

#include <boost/rational.hpp>

#include "twobit/fixedpoint.hpp"

namespace twobit {

using Rational = boost::rational<std::int64_t>;

// ln(p / (p - 2)). Throws DomainError for p < 3.
double epsilon_theoretical(int p);

struct PrivacyReport {
  int p = 0;
  double epsilon = 0.0;
  // The two-bit mechanism is pure epsilon-DP.
  double delta = 0.0;
  // True when the exhaustive enumeration ran (4 <= p <= 16) ...
  bool enumerated = false;
  // ... and reproduced the ratio p / (p - 2) exactly.
  bool verified = false;
};

PrivacyReport privacy_report(int p);

// Exact probabilities of the four possible outputs (sign, value).
class OutputDistribution {
 public:
  Rational probability(std::uint8_t sign, std::uint8_t value) const { return probs_[index(sign, value)]; }
  void set(std::uint8_t sign, std::uint8_t value, Rational pr) { probs_[index(sign, value)] = pr; }
  Rational total() const { return probs_[0] + probs_[1] + probs_[2] + probs_[3]; }

 private:
  static std::size_t index(std::uint8_t sign, std::uint8_t value) { return 2U * (sign & 1U) + (value & 1U); }
  std::array<Rational, 4> probs_{};
};

// Output law of the mapping for a concrete code when the location is drawn
// uniformly from [2, p].
OutputDistribution output_distribution_fixed(const SignedFixedPoint& code);

// Enumerated probabilities under the randomized-bits model: the differing bit
// is fixed, every other magnitude bit is an independent fair coin, and the
// location is uniform over [2, p]. Index [b] is the value of the differing
// bit in x; x-bar holds 1 - b there.
struct ProofModelResult {
  int p = 0;
  std::array<Rational, 2> x_outputs_zero{};
  std::array<Rational, 2> x_bar_outputs_zero{};
  std::array<Rational, 2> x_outputs_one{};
  std::array<Rational, 2> x_bar_outputs_one{};
  // Largest Pr[M(x) = o] / Pr[M(x-bar) = o] over both outputs and both b.
  Rational max_ratio{0};
};

// Enumerates all 2^(p-2) settings of the free bits and all p-1 locations.
// Throws ResourceError unless 4 <= p <= 16 and IndexError for a bad location.
ProofModelResult proof_model_check(int p, int differing_location);
inline ProofModelResult proof_model_check(int p) { return proof_model_check(p, p); }

struct PairRatio {
  // Valid when !unbounded.
  Rational ratio{0};
  // Some output has zero probability under x-bar but not under x.
  bool unbounded = false;
};

// max over outputs of Pr[o | x] / Pr[o | x-bar] for two concrete neighbouring
// codes (same sign, magnitudes differing in exactly one bit). Throws DomainError otherwise.
PairRatio fixed_pair_ratio(const SignedFixedPoint& x, const SignedFixedPoint& x_bar);

}  // namespace twobit
